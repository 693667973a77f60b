#include "fairbound/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/core.h>

#include "fairbound/error.hpp"

namespace fairbound {
namespace {

void check_lengths(std::size_t n, std::size_t other, const char* what) {
  if (n != other) {
    throw Error(ErrorKind::kValidation, fmt::format("{} has length {}, expected {}", what, other, n));
  }
}

std::vector<std::size_t> event_rows(EventMask event) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < event.size(); ++i) {
    if (event[i]) rows.push_back(i);
  }
  return rows;
}

std::vector<std::size_t> labeled_event_rows(std::span<const std::int8_t> group, EventMask event) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < event.size(); ++i) {
    if (event[i] && group[i] != kUnlabeled) rows.push_back(i);
  }
  return rows;
}

// Sum over cells of sum_i (x_i - xbar_cell)(y_i - ybar_cell); `cell` maps each
// listed row to its cell index in [0, n_cells).
double pooled_within_sum(std::span<const double> x, std::span<const double> y, std::span<const int> cell,
                         int n_cells) {
  std::vector<double> sx(static_cast<std::size_t>(n_cells), 0.0), sy(sx.size(), 0.0);
  std::vector<std::size_t> count(sx.size(), 0);
  for (std::size_t k = 0; k < x.size(); ++k) {
    const auto c = static_cast<std::size_t>(cell[k]);
    sx[c] += x[k];
    sy[c] += y[k];
    ++count[c];
  }
  for (std::size_t c = 0; c < sx.size(); ++c) {
    if (count[c]) {
      sx[c] /= static_cast<double>(count[c]);
      sy[c] /= static_cast<double>(count[c]);
    }
  }
  double total = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const auto c = static_cast<std::size_t>(cell[k]);
    total += (x[k] - sx[c]) * (y[k] - sy[c]);
  }
  return total;
}

struct LabeledRows {
  std::vector<double> f, b, B;
  std::vector<std::int64_t> keys;
};

LabeledRows gather_labeled(std::span<const double> f, std::span<const double> b,
                           std::span<const std::int8_t> group, EventMask event,
                           std::span<const std::int64_t> row_ids) {
  check_lengths(f.size(), b.size(), "proxy");
  check_lengths(f.size(), group.size(), "group");
  check_lengths(f.size(), event.size(), "event mask");
  if (!row_ids.empty()) check_lengths(f.size(), row_ids.size(), "row ids");
  LabeledRows out;
  for (auto i : labeled_event_rows(group, event)) {
    out.f.push_back(f[i]);
    out.b.push_back(b[i]);
    out.B.push_back(static_cast<double>(group[i]));
    out.keys.push_back(row_ids.empty() ? static_cast<std::int64_t>(i) : row_ids[i]);
  }
  if (out.f.size() < 2) {
    throw Error(ErrorKind::kInsufficientLabels,
                fmt::format("conditional covariance needs at least 2 labeled rows in the event, found {}",
                            out.f.size()));
  }
  return out;
}

}  // namespace

double prob_estimator(std::span<const double> f, std::span<const double> b, EventMask event) {
  check_lengths(f.size(), b.size(), "proxy");
  check_lengths(f.size(), event.size(), "event mask");
  double sb = 0.0, sbf = 0.0, sc = 0.0, scf = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (!event[i]) continue;
    ++n;
    sb += b[i];
    sbf += b[i] * f[i];
    sc += 1.0 - b[i];
    scf += (1.0 - b[i]) * f[i];
  }
  if (n == 0) throw Error(ErrorKind::kEmptyEvent, "probabilistic estimator: no rows in the event");
  if (sb <= 0.0 || sc <= 0.0) {
    throw Error(ErrorKind::kDegenerateProxy, "probabilistic estimator: proxy is all 0 or all 1 within the event");
  }
  return sbf / sb - scf / sc;
}

double linear_estimator(std::span<const double> f, std::span<const double> b, EventMask event) {
  check_lengths(f.size(), b.size(), "proxy");
  check_lengths(f.size(), event.size(), "event mask");
  const auto rows = event_rows(event);
  if (rows.size() < 2) {
    throw Error(ErrorKind::kEmptyEvent,
                fmt::format("linear estimator needs at least 2 rows in the event, found {}", rows.size()));
  }
  double fbar = 0.0, bbar = 0.0, bmin = b[rows[0]], bmax = b[rows[0]];
  for (auto i : rows) {
    fbar += f[i];
    bbar += b[i];
    bmin = std::min(bmin, b[i]);
    bmax = std::max(bmax, b[i]);
  }
  if (bmin == bmax) throw Error(ErrorKind::kDegenerateVariance, "linear estimator: proxy is constant within the event");
  const auto n = static_cast<double>(rows.size());
  fbar /= n;
  bbar /= n;
  double sfb = 0.0, sbb = 0.0;
  for (auto i : rows) {
    sfb += (f[i] - fbar) * (b[i] - bbar);
    sbb += (b[i] - bbar) * (b[i] - bbar);
  }
  return sfb / sbb;
}

double true_disparity(std::span<const double> f, std::span<const std::int8_t> group, EventMask event) {
  check_lengths(f.size(), group.size(), "group");
  check_lengths(f.size(), event.size(), "event mask");
  double s1 = 0.0, s0 = 0.0;
  std::size_t n1 = 0, n0 = 0;
  for (auto i : labeled_event_rows(group, event)) {
    if (group[i] == 1) {
      s1 += f[i];
      ++n1;
    } else {
      s0 += f[i];
      ++n0;
    }
  }
  if (n1 == 0 || n0 == 0) {
    throw Error(ErrorKind::kEmptyGroup,
                fmt::format("true disparity: labeled event rows hold {} of group 1 and {} of group 0", n1, n0));
  }
  return s1 / static_cast<double>(n1) - s0 / static_cast<double>(n0);
}

double cov_f_b_given_B(std::span<const double> f, std::span<const double> b, std::span<const std::int8_t> group,
                       EventMask event) {
  const LabeledRows rows = gather_labeled(f, b, group, event, {});
  std::vector<int> cell(rows.B.size());
  for (std::size_t k = 0; k < cell.size(); ++k) cell[k] = static_cast<int>(rows.B[k]);
  return pooled_within_sum(rows.f, rows.b, cell, 2) / static_cast<double>(rows.f.size());
}

double cov_f_B_given_b(std::span<const double> f, std::span<const double> b, std::span<const std::int8_t> group,
                       EventMask event, int n_bins, std::span<const std::int64_t> row_ids) {
  if (n_bins < 1) throw Error(ErrorKind::kValidation, "bin count must be at least 1");
  const LabeledRows rows = gather_labeled(f, b, group, event, row_ids);
  const auto bins = quantile_bins(rows.b, n_bins, rows.keys);
  return pooled_within_sum(rows.f, rows.B, bins, n_bins) / static_cast<double>(rows.f.size());
}

double cov_f_B_given_b_exact(std::span<const double> f, std::span<const double> b,
                             std::span<const std::int8_t> group, EventMask event) {
  const LabeledRows rows = gather_labeled(f, b, group, event, {});
  std::vector<double> levels = rows.b;
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  std::vector<int> cell(rows.b.size());
  for (std::size_t k = 0; k < cell.size(); ++k) {
    cell[k] = static_cast<int>(std::lower_bound(levels.begin(), levels.end(), rows.b[k]) - levels.begin());
  }
  return pooled_within_sum(rows.f, rows.B, cell, static_cast<int>(levels.size())) /
         static_cast<double>(rows.f.size());
}

std::vector<int> quantile_bins(std::span<const double> values, int n_bins, std::span<const std::int64_t> tie_keys) {
  if (n_bins < 1) throw Error(ErrorKind::kValidation, "bin count must be at least 1");
  if (!tie_keys.empty()) check_lengths(values.size(), tie_keys.size(), "tie keys");
  const std::size_t m = values.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto key = [&](std::size_t i) { return tie_keys.empty() ? static_cast<std::int64_t>(i) : tie_keys[i]; };
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t c) {
    if (values[a] != values[c]) return values[a] < values[c];
    return key(a) < key(c);
  });
  std::vector<int> bins(m);
  for (std::size_t k = 0; k < m; ++k) {
    bins[order[k]] = static_cast<int>((static_cast<unsigned long long>(k) * static_cast<unsigned>(n_bins)) / m);
  }
  return bins;
}

StandardErrors standard_errors(std::span<const double> f, std::span<const double> b, EventMask event) {
  check_lengths(f.size(), b.size(), "proxy");
  check_lengths(f.size(), event.size(), "event mask");
  const auto rows = event_rows(event);
  if (rows.size() < 3) {
    throw Error(ErrorKind::kEmptyEvent,
                fmt::format("standard errors need at least 3 rows in the event, found {}", rows.size()));
  }
  double fbar = 0.0, bbar = 0.0;
  for (auto i : rows) {
    fbar += f[i];
    bbar += b[i];
  }
  const auto n = static_cast<double>(rows.size());
  fbar /= n;
  bbar /= n;
  double sfb = 0.0, sbb = 0.0;
  for (auto i : rows) {
    sfb += (f[i] - fbar) * (b[i] - bbar);
    sbb += (b[i] - bbar) * (b[i] - bbar);
  }
  if (!(sbb > 0.0)) throw Error(ErrorKind::kDegenerateVariance, "standard errors: proxy is constant within the event");
  const double slope = sfb / sbb;
  const double intercept = fbar - slope * bbar;
  double rss = 0.0;
  for (auto i : rows) {
    const double e = f[i] - intercept - slope * b[i];
    rss += e * e;
  }
  const double sigma2 = rss / n;
  const double var_b = sbb / n;
  StandardErrors se;
  se.se_lin = std::sqrt(sigma2 / (n * var_b));
  se.se_prob = se.se_lin * var_b / (bbar * (1.0 - bbar));
  return se;
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::kUpperLowerPositive: return "upper_lower_positive";
    case Verdict::kUpperLowerNegative: return "upper_lower_negative";
    case Verdict::kInconclusive: return "inconclusive";
  }
  return "inconclusive";
}

Verdict bound_verdict(double cov_b_given_B, double cov_B_given_b) {
  if (cov_b_given_B > kDiagnosticTolerance && cov_B_given_b > kDiagnosticTolerance) {
    return Verdict::kUpperLowerPositive;
  }
  if (cov_b_given_B < -kDiagnosticTolerance && cov_B_given_b < -kDiagnosticTolerance) {
    return Verdict::kUpperLowerNegative;
  }
  return Verdict::kInconclusive;
}

DisparityReport audit(const Dataset& ds, std::span<const double> predictions, const MetricSpec& metric, int n_bins) {
  if (predictions.size() != ds.size()) {
    throw Error(ErrorKind::kValidation,
                fmt::format("{} predictions for {} dataset rows", predictions.size(), ds.size()));
  }
  if (ds.num_labeled() == 0) {
    throw Error(ErrorKind::kInsufficientLabels, "audit needs a nonempty labeled subset");
  }
  std::vector<double> labels(predictions.size());
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = hard_label(predictions[i]);
  const std::span<const double> y(ds.outcome().data(), ds.size());
  const std::span<const double> b(ds.proxy().data(), ds.size());
  const auto f = statistic_values(metric, labels, y);
  const auto event = event_mask(metric, labels, y);

  DisparityReport r;
  r.metric = metric.name;
  r.bins = n_bins;
  r.n_event = static_cast<std::size_t>(std::count(event.begin(), event.end(), std::uint8_t{1}));
  for (std::size_t i = 0; i < event.size(); ++i) {
    if (event[i] && ds.is_labeled(i)) ++r.n_labeled_event;
  }
  if (metric.event_depends_on_prediction()) {
    r.warnings.push_back(
        "event depends on the model's predictions; proxy calibration within the event is not guaranteed");
  }

  r.d_prob = prob_estimator(f, b, event);
  r.d_lin = linear_estimator(f, b, event);
  const auto se = standard_errors(f, b, event);
  r.se_lin = se.se_lin;
  r.se_prob = se.se_prob;
  r.cov_b_given_B = cov_f_b_given_B(f, b, ds.group(), event);
  r.cov_B_given_b = cov_f_B_given_b(f, b, ds.group(), event, n_bins, ds.row_ids());
  try {
    r.d_true = true_disparity(f, ds.group(), event);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kEmptyGroup) throw;
    r.warnings.push_back(std::string("d_true unavailable: ") + e.what());
  }
  r.verdict = bound_verdict(r.cov_b_given_B, r.cov_B_given_b);
  if (r.verdict == Verdict::kUpperLowerPositive) {
    r.lower = r.d_prob;
    r.upper = r.d_lin;
  } else if (r.verdict == Verdict::kUpperLowerNegative) {
    r.lower = r.d_lin;
    r.upper = r.d_prob;
  }
  return r;
}

std::optional<std::pair<double, double>> widened_interval(const DisparityReport& r, double z) {
  switch (r.verdict) {
    case Verdict::kUpperLowerPositive: return std::pair{r.d_prob - z * r.se_prob, r.d_lin + z * r.se_lin};
    case Verdict::kUpperLowerNegative: return std::pair{r.d_lin - z * r.se_lin, r.d_prob + z * r.se_prob};
    case Verdict::kInconclusive: return std::nullopt;
  }
  return std::nullopt;
}

nlohmann::json to_json(const DisparityReport& r) {
  nlohmann::json j;
  j["metric"] = r.metric;
  j["d_prob"] = r.d_prob;
  j["d_lin"] = r.d_lin;
  j["d_true"] = r.d_true ? nlohmann::json(*r.d_true) : nlohmann::json(nullptr);
  j["cov_b_given_B"] = r.cov_b_given_B;
  j["cov_B_given_b"] = r.cov_B_given_b;
  j["se_lin"] = r.se_lin;
  j["se_prob"] = r.se_prob;
  j["n_event"] = r.n_event;
  j["n_labeled_event"] = r.n_labeled_event;
  j["bins"] = r.bins;
  j["verdict"] = std::string(to_string(r.verdict));
  j["lower"] = r.lower ? nlohmann::json(*r.lower) : nlohmann::json(nullptr);
  j["upper"] = r.upper ? nlohmann::json(*r.upper) : nlohmann::json(nullptr);
  j["warnings"] = r.warnings;
  return j;
}

}  // namespace fairbound
