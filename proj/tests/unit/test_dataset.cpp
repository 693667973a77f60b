#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fairbound/csv.hpp"
#include "fairbound/dataset.hpp"
#include "fairbound/error.hpp"
#include "fairbound/metric.hpp"
#include "helpers.hpp"

namespace fb = fairbound;
using fbtest::TempDir;
using fbtest::write_text;

namespace {

fb::ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const fb::Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected fairbound::Error";
  return fb::ErrorKind::kIo;
}

fb::Dataset synthetic(std::size_t n, double label_rate, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd X(static_cast<Eigen::Index>(n), 2);
  std::vector<double> y(n), b(n);
  std::vector<std::int8_t> g(n);
  for (std::size_t i = 0; i < n; ++i) {
    X(static_cast<Eigen::Index>(i), 0) = u(rng);
    X(static_cast<Eigen::Index>(i), 1) = u(rng);
    y[i] = u(rng) < 0.5 ? 1.0 : 0.0;
    b[i] = u(rng);
    g[i] = u(rng) < label_rate ? static_cast<std::int8_t>(u(rng) < b[i]) : fb::kUnlabeled;
  }
  return fbtest::make_dataset(X, y, b, g);
}

}  // namespace

TEST(Csv, FormatDoubleRoundTripsExactly) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 2000; ++i) {
    const double v = u(rng) * std::pow(10.0, static_cast<int>(rng() % 30) - 15);
    const auto parsed = fb::parse_double(fb::format_double(v));
    ASSERT_TRUE(parsed.has_value());
    EXPECT_EQ(*parsed, v);
  }
  EXPECT_EQ(fb::format_double(0.1), "0.1");
}

TEST(Csv, ParseDoubleIsStrict) {
  EXPECT_FALSE(fb::parse_double("").has_value());
  EXPECT_FALSE(fb::parse_double("1.0x").has_value());
  EXPECT_FALSE(fb::parse_double("nan").has_value());
  EXPECT_FALSE(fb::parse_double("inf").has_value());
  EXPECT_EQ(*fb::parse_double(" 2.5 "), 2.5);
}

TEST(Csv, QuotedFieldsAndCrlf) {
  TempDir dir("csv");
  write_text(dir / "t.csv", "a,b\r\n\"x,1\",\"say \"\"hi\"\"\"\r\n");
  const auto t = fb::read_csv_table(dir / "t.csv");
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_EQ(t.rows[0][0], "x,1");
  EXPECT_EQ(t.rows[0][1], "say \"hi\"");
  EXPECT_EQ(t.column("b"), 1u);
  EXPECT_FALSE(t.column("c").has_value());
}

TEST(Dataset, FullyLabeledCsv) {
  TempDir dir("ds");
  write_text(dir / "d.csv", "x1,y,b,B\n0.5,1,0.9,1\n0.1,0,0.2,0\n0.3,1,0.6,1\n0.7,0,0.4,0\n");
  const auto ds = fb::load_csv(dir / "d.csv");
  EXPECT_EQ(ds.size(), 4u);
  EXPECT_EQ(ds.num_labeled(), 4u);
  EXPECT_EQ(ds.num_features(), 1);
}

TEST(Dataset, FullyUnlabeledCsvFailsWhenLabelsAreNeeded) {
  TempDir dir("ds");
  write_text(dir / "d.csv", "x1,y,b,B\n0.5,1,0.9,\n0.1,0,0.2,\n0.3,1,0.6,\n0.7,0,0.4,\n");
  const auto ds = fb::load_csv(dir / "d.csv");
  EXPECT_EQ(ds.num_labeled(), 0u);
  EXPECT_EQ(kind_of([&] { fb::make_split(ds, 0.5, 0.25, 1); }), fb::ErrorKind::kInsufficientLabels);
}

TEST(Dataset, OutOfRangeProxyNamesTheRow) {
  TempDir dir("ds");
  std::string text = "x1,y,b,B\n";
  for (int r = 1; r <= 8; ++r) text += r == 7 ? "0.1,1,1.2,1\n" : "0.1,1,0.5,1\n";
  write_text(dir / "d.csv", text);
  try {
    fb::load_csv(dir / "d.csv");
    FAIL() << "expected a validation error";
  } catch (const fb::Error& e) {
    EXPECT_EQ(e.kind(), fb::ErrorKind::kValidation);
    EXPECT_NE(std::string(e.what()).find("row 7"), std::string::npos) << e.what();
  }
}

TEST(Dataset, MissingValuesAreRejected) {
  TempDir dir("ds");
  write_text(dir / "d.csv", "x1,y,b,B\n,1,0.9,1\n");
  EXPECT_EQ(kind_of([&] { fb::load_csv(dir / "d.csv"); }), fb::ErrorKind::kValidation);
  write_text(dir / "e.csv", "x1,b,B\n1,0.9,1\n");
  EXPECT_EQ(kind_of([&] { fb::load_csv(dir / "e.csv"); }), fb::ErrorKind::kMissingColumn);
}

TEST(Dataset, WriteLoadRoundTripIsBitExact) {
  TempDir dir("ds");
  std::string text = "x1,x2,y,b,B\n";
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int r = 0; r < 200; ++r) {
    text += fb::format_double(u(rng) * 1000 - 500) + "," + fb::format_double(u(rng) / 3) + "," +
            (u(rng) < 0.5 ? "1" : "0") + "," + fb::format_double(u(rng)) + "," +
            (r % 3 == 0 ? "" : (u(rng) < 0.5 ? "1" : "0")) + "\n";
  }
  write_text(dir / "in.csv", text);
  const auto a = fb::load_csv(dir / "in.csv");
  fb::write_csv(a, dir / "out.csv");
  const auto b = fb::load_csv(dir / "out.csv");
  EXPECT_EQ(a.features(), b.features());
  EXPECT_EQ(a.outcome(), b.outcome());
  EXPECT_EQ(a.proxy(), b.proxy());
  EXPECT_TRUE(std::equal(a.group().begin(), a.group().end(), b.group().begin(), b.group().end()));
  EXPECT_EQ(fbtest::read_text(dir / "in.csv"), fbtest::read_text(dir / "out.csv"));
}

TEST(Split, Arithmetic) {
  const auto ds = synthetic(100, 1.0, 1);
  const auto s = fb::make_split(ds, 0.8, 0.1, 1);
  EXPECT_EQ(s.train_ids.size(), 80u);
  EXPECT_EQ(s.test_ids.size(), 20u);
  EXPECT_EQ(s.labeled_ids.size(), 10u);
}

TEST(Split, LabeledFractionIsOfTotalRows) {
  const auto ds = synthetic(150000, 1.0, 2);
  EXPECT_EQ(fb::make_split(ds, 0.8, 0.01, 4).labeled_ids.size(), 1500u);
}

TEST(Split, DeterministicAndDisjoint) {
  const auto ds = synthetic(500, 0.7, 5);
  const auto a = fb::make_split(ds, 0.6, 0.2, 1);
  EXPECT_EQ(a, fb::make_split(ds, 0.6, 0.2, 1));
  EXPECT_NE(a, fb::make_split(ds, 0.6, 0.2, 2));
  std::vector<std::int64_t> all = a.train_ids;
  all.insert(all.end(), a.test_ids.begin(), a.test_ids.end());
  std::sort(all.begin(), all.end());
  EXPECT_EQ(std::adjacent_find(all.begin(), all.end()), all.end());
  EXPECT_EQ(all.size(), 500u);
  for (auto id : a.labeled_ids) {
    EXPECT_TRUE(std::binary_search(a.train_ids.begin(), a.train_ids.end(), id));
    EXPECT_TRUE(ds.is_labeled(static_cast<std::size_t>(id)));
  }
}

TEST(Split, RejectsBadFractions) {
  const auto ds = synthetic(50, 1.0, 1);
  EXPECT_EQ(kind_of([&] { fb::make_split(ds, 1.0, 0.1, 1); }), fb::ErrorKind::kValidation);
  EXPECT_EQ(kind_of([&] { fb::make_split(ds, 0.5, 0.6, 1); }), fb::ErrorKind::kValidation);
}

TEST(Metric, Table) {
  const auto dp = fb::metric_spec("demographic_parity");
  EXPECT_EQ(dp.statistic, fb::Statistic::kPredictedPositive);
  EXPECT_EQ(dp.event, fb::Event::kAlways);
  const auto fpr = fb::metric_spec("fpr_parity");
  EXPECT_EQ(fpr.statistic, fb::Statistic::kMisclassified);
  EXPECT_EQ(fpr.event, fb::Event::kOutcomeNegative);
  const auto tpr = fb::metric_spec("tpr_parity");
  EXPECT_EQ(tpr.statistic, fb::Statistic::kMisclassified);
  EXPECT_EQ(tpr.event, fb::Event::kOutcomePositive);
  EXPECT_EQ(fb::metric_spec("dd"), dp);
  EXPECT_EQ(fb::metric_spec("fprd").event, fpr.event);
}

TEST(Metric, UnsupportedNameListsChoices) {
  try {
    fb::metric_spec("equalized_odds");
    FAIL();
  } catch (const fb::Error& e) {
    EXPECT_EQ(e.kind(), fb::ErrorKind::kUnsupported);
    EXPECT_NE(std::string(e.what()).find("demographic_parity"), std::string::npos);
  }
}

TEST(Metric, StatisticAndEventValues) {
  const std::vector<double> yhat{1, 0, 1, 0}, y{1, 1, 0, 0};
  const auto f = fb::statistic_values(fb::metric_spec("fpr_parity"), yhat, y);
  EXPECT_EQ(f, (std::vector<double>{0, 1, 1, 0}));
  const auto e = fb::event_mask(fb::metric_spec("fpr_parity"), yhat, y);
  EXPECT_EQ(e, (std::vector<std::uint8_t>{0, 0, 1, 1}));
  EXPECT_EQ(fb::hard_label(0.5), 1.0);
  EXPECT_EQ(fb::hard_label(0.4999), 0.0);
}
