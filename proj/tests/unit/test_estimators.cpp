#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <Eigen/Dense>

#include "fairbound/error.hpp"
#include "fairbound/estimators.hpp"
#include "helpers.hpp"

namespace fb = fairbound;
using fbtest::all_rows;

namespace {

using Vec = std::vector<double>;
using Groups = std::vector<std::int8_t>;

// Literal weighted-mean form of the probabilistic estimator.
double prob_oracle(const Vec& f, const Vec& b) {
  double num1 = 0, den1 = 0, num0 = 0, den0 = 0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    num1 += b[i] * f[i];
    den1 += b[i];
    num0 += (1 - b[i]) * f[i];
    den0 += 1 - b[i];
  }
  return num1 / den1 - num0 / den0;
}

// Slope of f on (1, b) from a dense least-squares solve.
double ols_slope(const Vec& f, const Vec& b) {
  const auto n = static_cast<Eigen::Index>(f.size());
  Eigen::MatrixXd A(n, 2);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    A(i, 0) = 1.0;
    A(i, 1) = b[static_cast<std::size_t>(i)];
    y(i) = f[static_cast<std::size_t>(i)];
  }
  return A.colPivHouseholderQr().solve(y)(1);
}

struct Rows {
  Vec f, b;
  Groups g;
};

Rows random_rows(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Rows r;
  for (std::size_t i = 0; i < n; ++i) {
    r.b.push_back(u(rng));
    r.f.push_back(u(rng) < 0.5 ? 1.0 : 0.0);
    r.g.push_back(static_cast<std::int8_t>(u(rng) < r.b.back()));
  }
  r.g[0] = 0;
  r.g[1] = 1;
  return r;
}

double var_n(const Vec& v) {
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size());
}

}  // namespace

TEST(ProbEstimator, Examples) {
  EXPECT_DOUBLE_EQ(fb::prob_estimator(Vec{1, 1, 0, 0}, Vec{1, 1, 0, 0}, all_rows(4)), 1.0);
  EXPECT_NEAR(fb::prob_estimator(Vec{0.3, 0.3, 0.3}, Vec{0.2, 0.5, 0.9}, all_rows(3)), 0.0, 1e-15);
  EXPECT_NEAR(fb::prob_estimator(Vec{1, 0, 1, 0}, Vec{0.9, 0.8, 0.2, 0.1}, all_rows(4)), 0.10, 1e-15);
}

TEST(ProbEstimator, Errors) {
  const std::vector<std::uint8_t> none(3, 0);
  EXPECT_THROW(fb::prob_estimator(Vec{1, 0, 1}, Vec{0.1, 0.2, 0.3}, none), fb::Error);
  try {
    fb::prob_estimator(Vec{1, 0}, Vec{1, 1}, all_rows(2));
    FAIL();
  } catch (const fb::Error& e) {
    EXPECT_EQ(e.kind(), fb::ErrorKind::kDegenerateProxy);
  }
}

TEST(LinearEstimator, Examples) {
  EXPECT_NEAR(fb::linear_estimator(Vec{1, 0, 1, 0}, Vec{0.9, 0.8, 0.2, 0.1}, all_rows(4)), 0.20, 1e-15);
  EXPECT_NEAR(fb::linear_estimator(Vec{2, 2, 2}, Vec{0.2, 0.5, 0.9}, all_rows(3)), 0.0, 1e-15);
  // Binary b equal to B: the dummy coefficient is the group-mean difference.
  const Vec f{1, 0, 1, 1, 0}, b{1, 1, 0, 0, 0};
  EXPECT_NEAR(fb::linear_estimator(f, b, all_rows(5)), 0.5 - 2.0 / 3.0, 1e-15);
  try {
    fb::linear_estimator(Vec{1, 0}, Vec{0.4, 0.4}, all_rows(2));
    FAIL();
  } catch (const fb::Error& e) {
    EXPECT_EQ(e.kind(), fb::ErrorKind::kDegenerateVariance);
  }
}

TEST(LinearEstimator, MatchesIndependentLeastSquares) {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 50; ++t) {
    const auto r = random_rows(rng, 5 + rng() % 200);
    EXPECT_NEAR(fb::linear_estimator(r.f, r.b, all_rows(r.f.size())), ols_slope(r.f, r.b), 1e-10);
    EXPECT_NEAR(fb::prob_estimator(r.f, r.b, all_rows(r.f.size())), prob_oracle(r.f, r.b), 1e-12);
  }
}

TEST(TrueDisparity, Examples) {
  EXPECT_DOUBLE_EQ(fb::true_disparity(Vec{1, 0}, Groups{1, 0}, all_rows(2)), 1.0);
  EXPECT_DOUBLE_EQ(fb::true_disparity(Vec{1, 1, 0, 0}, Groups{1, 0, 1, 0}, all_rows(4)), 0.0);
  EXPECT_DOUBLE_EQ(fb::true_disparity(Vec{1, 0, 1, 0}, Groups{1, 1, 0, 0}, all_rows(4)), 0.0);
  try {
    fb::true_disparity(Vec{1, 0}, Groups{1, 1}, all_rows(2));
    FAIL();
  } catch (const fb::Error& e) {
    EXPECT_EQ(e.kind(), fb::ErrorKind::kEmptyGroup);
  }
}

TEST(TrueDisparity, IgnoresUnlabeledRows) {
  EXPECT_DOUBLE_EQ(fb::true_disparity(Vec{1, 0, 1}, Groups{1, 0, fb::kUnlabeled}, all_rows(3)), 1.0);
}

TEST(CovFbGivenB, Examples) {
  EXPECT_DOUBLE_EQ(fb::cov_f_b_given_B(Vec{1, 0}, Vec{0.3, 0.8}, Groups{1, 0}, all_rows(2)), 0.0);
  EXPECT_NEAR(fb::cov_f_b_given_B(Vec{1, 0, 1, 0}, Vec{0.9, 0.7, 0.3, 0.1}, Groups{1, 1, 0, 0}, all_rows(4)), 0.05,
              1e-15);
  EXPECT_DOUBLE_EQ(fb::cov_f_b_given_B(Vec{1, 1, 1}, Vec{0.9, 0.7, 0.3}, Groups{1, 1, 0}, all_rows(3)), 0.0);
  try {
    fb::cov_f_b_given_B(Vec{1, 0}, Vec{0.3, 0.8}, Groups{1, fb::kUnlabeled}, all_rows(2));
    FAIL();
  } catch (const fb::Error& e) {
    EXPECT_EQ(e.kind(), fb::ErrorKind::kInsufficientLabels);
  }
}

TEST(CovFBGivenb, Examples) {
  // B constant within each of the two bins.
  EXPECT_DOUBLE_EQ(
      fb::cov_f_B_given_b(Vec{1, 0, 1, 0}, Vec{0.1, 0.2, 0.8, 0.9}, Groups{0, 0, 1, 1}, all_rows(4), 2), 0.0);
  EXPECT_NEAR(fb::cov_f_B_given_b(Vec{1, 0, 1, 0}, Vec{0.6, 0.6, 0.4, 0.4}, Groups{1, 0, 1, 0}, all_rows(4), 2), 0.25,
              1e-15);
}

TEST(CovFBGivenb, SingleBinIsUnconditionalCovariance) {
  std::mt19937_64 rng(4);
  const auto r = random_rows(rng, 57);
  double mf = 0, mB = 0;
  for (std::size_t i = 0; i < r.f.size(); ++i) {
    mf += r.f[i];
    mB += r.g[i];
  }
  const double n = static_cast<double>(r.f.size());
  mf /= n;
  mB /= n;
  double c = 0;
  for (std::size_t i = 0; i < r.f.size(); ++i) c += (r.f[i] - mf) * (r.g[i] - mB);
  EXPECT_NEAR(fb::cov_f_B_given_b(r.f, r.b, r.g, all_rows(r.f.size()), 1), c / n, 1e-14);
}

TEST(QuantileBins, EqualFrequencyWithTieKeys) {
  const Vec v{0.5, 0.5, 0.5, 0.5, 0.1, 0.9};
  const std::vector<std::int64_t> keys{10, 3, 7, 1, 0, 2};
  const auto bins = fb::quantile_bins(v, 3, keys);
  // Ranking: 0.1, then 0.5 by key 1,3,7,10, then 0.9.
  EXPECT_EQ(bins, (std::vector<int>{2, 1, 1, 0, 0, 2}));
}

TEST(StandardErrors, PerfectFitGivesZero) {
  const Vec b{0.1, 0.4, 0.5, 0.9};
  Vec f;
  for (double x : b) f.push_back(0.2 + 0.7 * x);
  const auto se = fb::standard_errors(f, b, all_rows(4));
  EXPECT_NEAR(se.se_lin, 0.0, 1e-12);
  EXPECT_NEAR(se.se_prob, 0.0, 1e-12);
}

TEST(StandardErrors, BinaryProxyScalesByOne) {
  const Vec f{1, 0, 1, 1, 0, 0}, b{1, 1, 1, 0, 0, 0};
  const auto se = fb::standard_errors(f, b, all_rows(6));
  EXPECT_GT(se.se_lin, 0.0);
  EXPECT_NEAR(se.se_prob, se.se_lin, 1e-15);
}

TEST(StandardErrors, MatchesMatrixOracle) {
  const Vec f{1, 0, 1, 0}, b{0.9, 0.8, 0.2, 0.1};
  Eigen::MatrixXd A(4, 2);
  Eigen::VectorXd y(4);
  for (int i = 0; i < 4; ++i) {
    A(i, 0) = 1;
    A(i, 1) = b[static_cast<std::size_t>(i)];
    y(i) = f[static_cast<std::size_t>(i)];
  }
  const Eigen::VectorXd beta = A.colPivHouseholderQr().solve(y);
  const double sigma2 = (y - A * beta).squaredNorm() / 4.0;
  const Eigen::Matrix2d cov = sigma2 * (A.transpose() * A).inverse();
  const auto se = fb::standard_errors(f, b, all_rows(4));
  EXPECT_NEAR(se.se_lin, std::sqrt(cov(1, 1)), 1e-12);
  const double bbar = 0.5;
  EXPECT_NEAR(se.se_prob, se.se_lin * var_n(b) / (bbar * (1 - bbar)), 1e-12);
}

TEST(Property, ScalingIdentity) {
  std::mt19937_64 rng(101);
  for (int t = 0; t < 300; ++t) {
    const auto r = random_rows(rng, 4 + rng() % 300);
    const double bbar = std::accumulate(r.b.begin(), r.b.end(), 0.0) / static_cast<double>(r.b.size());
    const double dp = fb::prob_estimator(r.f, r.b, all_rows(r.f.size()));
    const double dl = fb::linear_estimator(r.f, r.b, all_rows(r.f.size()));
    const double scaled = ols_slope(r.f, r.b) * var_n(r.b) / (bbar * (1 - bbar));
    EXPECT_LE(std::abs(dp - scaled), 1e-10 * std::max(std::abs(dp), 1e-12));
    EXPECT_LE(std::abs(dp), std::abs(dl) + 1e-15);  // attenuation
  }
}

TEST(Property, SignInvariance) {
  std::mt19937_64 rng(5);
  const auto r = random_rows(rng, 80);
  Vec neg;
  for (double x : r.f) neg.push_back(-x);
  const auto m = all_rows(r.f.size());
  EXPECT_NEAR(fb::prob_estimator(neg, r.b, m), -fb::prob_estimator(r.f, r.b, m), 1e-14);
  EXPECT_NEAR(fb::linear_estimator(neg, r.b, m), -fb::linear_estimator(r.f, r.b, m), 1e-14);
  EXPECT_NEAR(fb::true_disparity(neg, r.g, m), -fb::true_disparity(r.f, r.g, m), 1e-14);
  EXPECT_NEAR(fb::cov_f_b_given_B(neg, r.b, r.g, m), -fb::cov_f_b_given_B(r.f, r.b, r.g, m), 1e-14);
  EXPECT_NEAR(fb::cov_f_B_given_b(neg, r.b, r.g, m, 5), -fb::cov_f_B_given_b(r.f, r.b, r.g, m, 5), 1e-14);
}

TEST(Property, PermutationInvariance) {
  std::mt19937_64 rng(6);
  for (int t = 0; t < 20; ++t) {
    const auto r = random_rows(rng, 60 + rng() % 60);
    const std::size_t n = r.f.size();
    std::vector<std::int64_t> ids(n);
    std::iota(ids.begin(), ids.end(), 0);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Rows q;
    std::vector<std::int64_t> qid;
    for (auto k : perm) {
      q.f.push_back(r.f[k]);
      q.b.push_back(r.b[k]);
      q.g.push_back(r.g[k]);
      qid.push_back(ids[k]);
    }
    const auto m = all_rows(n);
    EXPECT_NEAR(fb::prob_estimator(q.f, q.b, m), fb::prob_estimator(r.f, r.b, m), 1e-13);
    EXPECT_NEAR(fb::linear_estimator(q.f, q.b, m), fb::linear_estimator(r.f, r.b, m), 1e-13);
    EXPECT_NEAR(fb::cov_f_b_given_B(q.f, q.b, q.g, m), fb::cov_f_b_given_B(r.f, r.b, r.g, m), 1e-13);
    EXPECT_NEAR(fb::cov_f_B_given_b(q.f, q.b, q.g, m, 7, qid), fb::cov_f_B_given_b(r.f, r.b, r.g, m, 7, ids),
                1e-13);
  }
}

TEST(Property, BinaryProxyCollapse) {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 20; ++t) {
    auto r = random_rows(rng, 30 + rng() % 50);
    for (std::size_t i = 0; i < r.b.size(); ++i) r.b[i] = r.g[i];
    const auto m = all_rows(r.f.size());
    const double dt = fb::true_disparity(r.f, r.g, m);
    EXPECT_NEAR(fb::prob_estimator(r.f, r.b, m), dt, 1e-14);
    EXPECT_NEAR(fb::linear_estimator(r.f, r.b, m), dt, 1e-14);
  }
}

TEST(Verdict, Signs) {
  EXPECT_EQ(fb::bound_verdict(0.05, 0.03), fb::Verdict::kUpperLowerPositive);
  EXPECT_EQ(fb::bound_verdict(-0.05, -0.03), fb::Verdict::kUpperLowerNegative);
  EXPECT_EQ(fb::bound_verdict(0.05, -0.01), fb::Verdict::kInconclusive);
  EXPECT_EQ(fb::bound_verdict(0.05, 0.0), fb::Verdict::kInconclusive);
}

TEST(Audit, FullyLabeledBinaryProxy) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0, 1);
  const std::size_t n = 400;
  Eigen::MatrixXd X(n, 1);
  Vec y(n), b(n), pred(n);
  Groups g(n);
  for (std::size_t i = 0; i < n; ++i) {
    X(static_cast<Eigen::Index>(i), 0) = u(rng);
    g[i] = static_cast<std::int8_t>(u(rng) < 0.4);
    b[i] = g[i];
    y[i] = u(rng) < 0.5;
    pred[i] = u(rng) < (g[i] ? 0.7 : 0.4) ? 0.8 : 0.2;
  }
  const auto ds = fbtest::make_dataset(X, y, b, g);
  const auto r = fb::audit(ds, pred, fb::metric_spec("dd"));
  ASSERT_TRUE(r.d_true.has_value());
  EXPECT_NEAR(r.d_prob, *r.d_true, 1e-14);
  EXPECT_NEAR(r.d_lin, *r.d_true, 1e-14);
}

TEST(Audit, PositiveVerdictOrdersTheBounds) {
  // f increases with b inside each group and B increases with f inside each b level.
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0, 1);
  const std::size_t n = 4000;
  Eigen::MatrixXd X(n, 1);
  Vec y(n), b(n), pred(n);
  Groups g(n);
  for (std::size_t i = 0; i < n; ++i) {
    b[i] = 0.05 + 0.9 * u(rng);
    const double score = u(rng) < b[i] ? 0.9 : 0.1;
    pred[i] = score;
    g[i] = static_cast<std::int8_t>(u(rng) < std::clamp(b[i] + (score > 0.5 ? 0.05 : -0.05), 0.0, 1.0));
    X(static_cast<Eigen::Index>(i), 0) = b[i];
    y[i] = u(rng) < 0.5;
  }
  const auto r = fb::audit(fbtest::make_dataset(X, y, b, g), pred, fb::metric_spec("dd"));
  ASSERT_EQ(r.verdict, fb::Verdict::kUpperLowerPositive);
  EXPECT_LE(r.d_prob, r.d_lin);
  ASSERT_TRUE(r.lower && r.upper);
  EXPECT_DOUBLE_EQ(*r.lower, r.d_prob);
  EXPECT_DOUBLE_EQ(*r.upper, r.d_lin);
  const auto w = fb::widened_interval(r);
  ASSERT_TRUE(w.has_value());
  EXPECT_NEAR(w->first, r.d_prob - 2 * r.se_prob, 1e-15);
  EXPECT_NEAR(w->second, r.d_lin + 2 * r.se_lin, 1e-15);
}

TEST(Audit, PredictionDependentEventWarns) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0, 1);
  const std::size_t n = 300;
  Eigen::MatrixXd X(n, 1);
  Vec y(n), b(n), pred(n);
  Groups g(n);
  for (std::size_t i = 0; i < n; ++i) {
    b[i] = u(rng);
    g[i] = static_cast<std::int8_t>(u(rng) < b[i]);
    y[i] = u(rng) < 0.5;
    pred[i] = u(rng);
    X(static_cast<Eigen::Index>(i), 0) = 0;
  }
  const auto r = fb::audit(fbtest::make_dataset(X, y, b, g), pred,
                         fb::MetricSpec{"ppv_parity", fb::Statistic::kOutcomePositive, fb::Event::kPredictedPositive});
  EXPECT_FALSE(r.warnings.empty());
  EXPECT_TRUE(fb::to_json(r).contains("verdict"));
}
