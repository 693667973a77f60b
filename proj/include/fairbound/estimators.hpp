#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fairbound/dataset.hpp"
#include "fairbound/metric.hpp"

namespace fairbound {

// Disparity estimators over rows (f_i, b_i, B_i) restricted to an event mask.
//
// Normalization: every variance and covariance here divides by the number of
// rows (population convention), never n-1. With that convention the identity
//     prob_estimator = linear_estimator * var(b) / (mean(b) (1 - mean(b)))
// is exact in finite samples, not only asymptotically.
//
// Group spans use 0/1 for observed groups and kUnlabeled otherwise; the
// conditional-covariance diagnostics only look at labeled rows.

using EventMask = std::span<const std::uint8_t>;

/// Proxy-weighted difference of means of f. Throws kEmptyEvent when no row is in
/// the event, kDegenerateProxy when the event's b are all 0 or all 1.
double prob_estimator(std::span<const double> f, std::span<const double> b, EventMask event);

/// Coefficient of b in the regression of f on (b, 1) over the event.
/// Throws kEmptyEvent with fewer than two rows, kDegenerateVariance for constant b.
double linear_estimator(std::span<const double> f, std::span<const double> b, EventMask event);

/// Difference of group means of f over labeled event rows. Throws kEmptyGroup.
double true_disparity(std::span<const double> f, std::span<const std::int8_t> group, EventMask event);

/// Pooled within-group covariance of f and b over labeled event rows:
/// (1/n) sum (f_i - fbar^{B_i}) (b_i - bbar^{B_i}).
double cov_f_b_given_B(std::span<const double> f, std::span<const double> b,
                       std::span<const std::int8_t> group, EventMask event);

/// Pooled within-bin covariance of f and B, where labeled event rows are cut into
/// `n_bins` equal-frequency bins of b. Ties in b are ordered by `row_ids`
/// (positional order when empty). Bins holding fewer than two rows contribute 0.
double cov_f_B_given_b(std::span<const double> f, std::span<const double> b,
                       std::span<const std::int8_t> group, EventMask event, int n_bins,
                       std::span<const std::int64_t> row_ids = {});

/// Same as cov_f_B_given_b but conditioning on each distinct value of b exactly;
/// meaningful when b is discrete.
double cov_f_B_given_b_exact(std::span<const double> f, std::span<const double> b,
                             std::span<const std::int8_t> group, EventMask event);

/// Equal-frequency bin index (0..n_bins-1) for each value. Values are ranked by
/// (value, tie_key); element k of the ranking goes to bin floor(k * n_bins / m).
std::vector<int> quantile_bins(std::span<const double> values, int n_bins,
                               std::span<const std::int64_t> tie_keys = {});

struct StandardErrors {
  double se_lin = 0.0;
  double se_prob = 0.0;
};

/// Standard errors of the linear estimator (classical OLS form sigma^2/(n s_b^2)
/// with sigma^2 the mean squared residual) and of the probabilistic estimator,
/// obtained by the same var(b)/(bbar(1-bbar)) scaling that links the two point
/// estimates. The source formula for the scaled distribution is ambiguous about
/// whether the ratio enters squared; the linear scaling is the one consistent
/// with the exact point-estimate identity.
StandardErrors standard_errors(std::span<const double> f, std::span<const double> b, EventMask event);

enum class Verdict { kUpperLowerPositive, kUpperLowerNegative, kInconclusive };

std::string_view to_string(Verdict v);

/// Diagnostics with |value| at or below this are treated as having no sign.
inline constexpr double kDiagnosticTolerance = 1e-12;

/// Positive when both diagnostics are positive (D^P <= D <= D^L), negative when
/// both are negative (D^L <= D <= D^P), inconclusive otherwise.
Verdict bound_verdict(double cov_b_given_B, double cov_B_given_b);

struct DisparityReport {
  std::string metric;
  double d_prob = 0.0;
  double d_lin = 0.0;
  std::optional<double> d_true;
  double cov_b_given_B = 0.0;
  double cov_B_given_b = 0.0;
  double se_lin = 0.0;
  double se_prob = 0.0;
  std::size_t n_event = 0;
  std::size_t n_labeled_event = 0;
  int bins = 0;
  Verdict verdict = Verdict::kInconclusive;
  /// Bound interval implied by the verdict; empty when inconclusive.
  std::optional<double> lower;
  std::optional<double> upper;
  std::vector<std::string> warnings;
};

/// Measures a model's disparity. D^P, D^L and the standard errors use every row
/// in the event; the covariance diagnostics and d_true use labeled event rows only.
/// `predictions` are scores or hard labels (thresholded at 0.5).
DisparityReport audit(const Dataset& ds, std::span<const double> predictions, const MetricSpec& metric,
                      int n_bins = 10);

/// Interval [lower - 2 se(lower), upper + 2 se(upper)] for a conclusive report.
std::optional<std::pair<double, double>> widened_interval(const DisparityReport& r, double z = 2.0);

nlohmann::json to_json(const DisparityReport& r);

}  // namespace fairbound
