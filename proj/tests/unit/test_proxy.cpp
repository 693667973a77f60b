#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fairbound/error.hpp"
#include "fairbound/proxy.hpp"
#include "fairbound/simulator.hpp"
#include "helpers.hpp"

namespace fb = fairbound;

namespace {

fb::ProxyTables one_entry_tables(fb::LikelihoodPair first, fb::LikelihoodPair sur, fb::LikelihoodPair geo,
                                 double prior = 0.5) {
  fb::ProxyTables t;
  t.first_name.insert("ana", first);
  t.surname.insert("lee", sur);
  t.geography.insert("g1", geo);
  t.prior = prior;
  return t;
}

// Brute-force AUC: fraction of (positive, negative) pairs ranked correctly, ties half.
double pairwise_auc(std::span<const double> b, std::span<const std::int8_t> g) {
  double good = 0, pairs = 0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (g[i] != 1) continue;
    for (std::size_t j = 0; j < b.size(); ++j) {
      if (g[j] != 0) continue;
      pairs += 1;
      good += b[i] > b[j] ? 1.0 : (b[i] == b[j] ? 0.5 : 0.0);
    }
  }
  return good / pairs;
}

}  // namespace

TEST(Posterior, UninformativeFactorsReturnThePrior) {
  const auto t = one_entry_tables({0.3, 0.3}, {0.2, 0.2}, {0.01, 0.01});
  EXPECT_NEAR(fb::posterior("ana", "lee", "g1", t).probability, 0.5, 1e-15);
}

TEST(Posterior, HandComputedBayes) {
  const auto t = one_entry_tables({0.2, 0.1}, {0.3, 0.1}, {0.5, 0.1});
  const auto p = fb::posterior("ana", "lee", "g1", t);
  EXPECT_NEAR(p.probability, 0.015 / (0.015 + 0.0005), 1e-12);
  EXPECT_NEAR(p.probability, 0.96774, 1e-5);
  EXPECT_EQ(p.method, fb::ProxyMethod::kBifsg);
}

TEST(Posterior, PriorEntersTheProduct) {
  const auto t = one_entry_tables({0.2, 0.1}, {0.3, 0.1}, {0.5, 0.1}, 0.2);
  const double num = 0.2 * (0.2 * 0.3 * 0.5), den = num + 0.8 * (0.1 * 0.1 * 0.1);
  EXPECT_NEAR(fb::posterior("ana", "lee", "g1", t).probability, num / den, 1e-12);
}

TEST(Posterior, FallbacksDropMissingFactors) {
  const auto t = one_entry_tables({0.2, 0.1}, {0.3, 0.1}, {0.5, 0.1});
  const auto no_surname = fb::posterior("ana", std::nullopt, "g1", t);
  EXPECT_NEAR(no_surname.probability, 0.1 / (0.1 + 0.01), 1e-12);
  EXPECT_EQ(no_surname.method, fb::ProxyMethod::kBifg);
  const auto rare_first = fb::posterior("zed", "lee", "g1", t);
  EXPECT_NEAR(rare_first.probability, 0.15 / (0.15 + 0.01), 1e-12);
  EXPECT_EQ(rare_first.method, fb::ProxyMethod::kBisg);
  EXPECT_EQ(fb::posterior(std::nullopt, std::nullopt, "g1", t).method, fb::ProxyMethod::kGeographyOnly);
}

TEST(Posterior, KeysAreCaseAndSpaceInsensitive) {
  const auto t = one_entry_tables({0.2, 0.1}, {0.3, 0.1}, {0.5, 0.1});
  EXPECT_EQ(fb::posterior(" ANA", "Lee ", "G1", t).probability, fb::posterior("ana", "lee", "g1", t).probability);
}

TEST(Posterior, UnresolvableRecords) {
  const auto t = one_entry_tables({0.2, 0.1}, {0.3, 0.1}, {0.5, 0.1});
  for (auto geo : {std::optional<std::string_view>{}, std::optional<std::string_view>{"nowhere"}}) {
    try {
      fb::posterior("ana", "lee", geo, t);
      FAIL();
    } catch (const fb::Error& e) {
      EXPECT_EQ(e.kind(), fb::ErrorKind::kUnresolvableRecord);
    }
  }
  const auto zero = one_entry_tables({0.0, 0.0}, {0.3, 0.1}, {0.5, 0.1});
  EXPECT_THROW(fb::posterior("ana", "lee", "g1", zero), fb::Error);
}

TEST(Property, PosteriorClassesSumToOne) {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(1e-6, 1.0);
  for (int t = 0; t < 2000; ++t) {
    const fb::LikelihoodPair a{u(rng), u(rng)}, s{u(rng), u(rng)}, g{u(rng), u(rng)};
    const double prior = std::clamp(u(rng), 0.01, 0.99);
    const double p1 = fb::posterior("ana", "lee", "g1", one_entry_tables(a, s, g, prior)).probability;
    const auto swap = [](fb::LikelihoodPair x) { return fb::LikelihoodPair{x.given_negative, x.given_positive}; };
    const double p0 = fb::posterior("ana", "lee", "g1", one_entry_tables(swap(a), swap(s), swap(g), 1 - prior)).probability;
    EXPECT_NEAR(p1 + p0, 1.0, 1e-12);
  }
}

TEST(Property, PosteriorMonotoneInPositiveLikelihood) {
  std::mt19937_64 rng(78);
  std::uniform_real_distribution<double> u(1e-4, 1.0);
  for (int t = 0; t < 500; ++t) {
    const fb::LikelihoodPair s{u(rng), u(rng)}, g{u(rng), u(rng)};
    const double neg = u(rng);
    double lo = u(rng), hi = u(rng);
    if (lo > hi) std::swap(lo, hi);
    const double p_lo = fb::posterior("ana", "lee", "g1", one_entry_tables({lo, neg}, s, g)).probability;
    const double p_hi = fb::posterior("ana", "lee", "g1", one_entry_tables({hi, neg}, s, g)).probability;
    EXPECT_LE(p_lo, p_hi + 1e-15);
  }
}

TEST(LikelihoodTable, LoadsAndValidates) {
  fbtest::TempDir dir("lt");
  fbtest::write_text(dir / "t.csv", "key,p_given_B1,p_given_B0\nSmith,0.01,0.02\n");
  const auto t = fb::load_likelihood_table(dir / "t.csv");
  ASSERT_TRUE(t.find("smith").has_value());
  EXPECT_DOUBLE_EQ(t.find("SMITH")->given_negative, 0.02);
  fbtest::write_text(dir / "bad.csv", "key,p_given_B1,p_given_B0\nSmith,1.5,0.02\n");
  EXPECT_THROW(fb::load_likelihood_table(dir / "bad.csv"), fb::Error);
}

TEST(Calibration, PerfectProxy) {
  const std::vector<double> b{1, 0, 1, 0, 1, 0, 0, 1, 0, 0};
  const std::vector<std::int8_t> g{1, 0, 1, 0, 1, 0, 0, 1, 0, 0};
  const auto r = fb::calibration_report(b, g, 2);
  EXPECT_DOUBLE_EQ(r.auc, 1.0);
  EXPECT_DOUBLE_EQ(r.accuracy, 1.0);
  EXPECT_DOUBLE_EQ(r.precision, 1.0);
  EXPECT_DOUBLE_EQ(r.recall, 1.0);
}

TEST(Calibration, ConstantProxyIsUninformative) {
  const std::vector<double> b(20, 0.5);
  std::vector<std::int8_t> g(20);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = static_cast<std::int8_t>(i % 2);
  const auto r = fb::calibration_report(b, g, 10);
  EXPECT_DOUBLE_EQ(r.auc, 0.5);
  EXPECT_EQ(r.bin_edges.size(), 11u);
  EXPECT_TRUE(std::isnan(r.predicted_mean[0]));
}

TEST(Calibration, AucMatchesPairwiseOracleOnSimulatedData) {
  const auto sim = fb::generate(fb::DgpConfig::preset(10, 3000, 4));
  const auto& b = sim.data.proxy();
  const std::span<const double> bs(b.data(), static_cast<std::size_t>(b.size()));
  const auto r = fb::calibration_report(bs, sim.data.group(), 10);
  EXPECT_NEAR(r.auc, pairwise_auc(bs, sim.data.group()), 1e-12);
  EXPECT_GT(r.auc, 0.7);
}

TEST(Calibration, SingleClassHasNoAuc) {
  const std::vector<double> b{0.2, 0.4, 0.6};
  const std::vector<std::int8_t> g{1, 1, 1};
  EXPECT_THROW(fb::calibration_report(b, g, 2), fb::Error);
}

TEST(Recalibrate, CalibratedInputIsNearlyUnchanged) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0, 1);
  const std::size_t n = 100000;
  std::vector<double> b(n);
  std::vector<std::int8_t> g(n);
  for (std::size_t i = 0; i < n; ++i) {
    b[i] = u(rng);
    g[i] = static_cast<std::int8_t>(u(rng) < b[i]);
  }
  const auto r = fb::recalibrate(b, g);
  EXPECT_NEAR(r.intercept, 0.0, 0.01);
  EXPECT_NEAR(r.slope, 1.0, 0.02);
  EXPECT_FALSE(r.degenerate);
}

TEST(Recalibrate, ShiftedProxyMovesTowardTruth) {
  const auto sim = fb::generate(fb::DgpConfig::preset(10, 20000, 6));
  const auto& truth = sim.data.proxy();
  std::vector<double> shifted(static_cast<std::size_t>(truth.size()));
  for (Eigen::Index i = 0; i < truth.size(); ++i) shifted[static_cast<std::size_t>(i)] = std::min(1.0, truth(i) + 0.1);
  const auto r = fb::recalibrate(shifted, sim.data.group());
  double raw = 0, fixed = 0;
  for (Eigen::Index i = 0; i < truth.size(); ++i) {
    raw += std::abs(shifted[static_cast<std::size_t>(i)] - truth(i));
    fixed += std::abs(r.values(i) - truth(i));
  }
  EXPECT_LT(fixed, raw);
}

TEST(Recalibrate, AllPositiveLabelsAreDegenerate) {
  const std::vector<double> b{0.2, 0.4, 0.7};
  const std::vector<std::int8_t> g{1, 1, 1};
  const auto r = fb::recalibrate(b, g);
  EXPECT_TRUE(r.degenerate);
  EXPECT_DOUBLE_EQ(r.slope, 0.0);
  EXPECT_DOUBLE_EQ(r.values(0), r.values(2));
}

TEST(Property, RecalibrationIsIdempotent) {
  std::mt19937_64 rng(32);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> b(5000);
  std::vector<std::int8_t> g(5000, fb::kUnlabeled);
  for (std::size_t i = 0; i < b.size(); ++i) {
    b[i] = 0.1 + 0.6 * u(rng);
    if (i % 4 == 0) g[i] = static_cast<std::int8_t>(u(rng) < 0.3 + 0.5 * b[i]);
  }
  const auto once = fb::recalibrate(b, g);
  const std::vector<double> v(once.values.data(), once.values.data() + once.values.size());
  const auto twice = fb::recalibrate(v, g);
  EXPECT_LT((twice.values - once.values).cwiseAbs().maxCoeff(), 1e-10);
}
