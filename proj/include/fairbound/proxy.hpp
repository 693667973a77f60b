#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

namespace fairbound {

/// Pr[key | B=1] and Pr[key | B=0].
struct LikelihoodPair {
  double given_positive = 0.0;
  double given_negative = 0.0;
};

/// Sparse lookup from a name or geography id to its class likelihoods.
/// Keys are trimmed and ASCII case-folded on insert and lookup.
class LikelihoodTable {
 public:
  void insert(std::string_view key, LikelihoodPair value);
  std::optional<LikelihoodPair> find(std::string_view key) const;
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  static std::string normalize_key(std::string_view key);

 private:
  std::unordered_map<std::string, LikelihoodPair> entries_;
};

/// Reads a table CSV with columns key, p_given_B1, p_given_B0.
LikelihoodTable load_likelihood_table(const std::filesystem::path& path);

struct ProxyTables {
  LikelihoodTable first_name;
  LikelihoodTable surname;
  LikelihoodTable geography;
  double prior = 0.5;
};

/// Which factors entered a posterior: first name, surname and geography (BIFSG),
/// surname and geography (BISG), first name and geography (BIFG), geography only.
enum class ProxyMethod { kBifsg, kBisg, kBifg, kGeographyOnly };

std::string_view to_string(ProxyMethod m);

struct Posterior {
  double probability = 0.0;
  ProxyMethod method = ProxyMethod::kGeographyOnly;
};

/// Naive-Bayes posterior Pr[B=1 | first, surname, geo]. Factors that are absent or
/// missing from their table are left out, which yields the BIFSG -> BISG -> geo
/// fallback. Throws kUnresolvableRecord when the geography factor cannot be
/// resolved or both class products vanish.
Posterior posterior(std::optional<std::string_view> first, std::optional<std::string_view> surname,
                    std::optional<std::string_view> geo, const ProxyTables& tables);

struct CalibrationReport {
  std::vector<double> bin_edges;                ///< n_bins + 1 edges from 0 to 1
  std::vector<std::size_t> counts;
  std::vector<double> predicted_mean;           ///< NaN for empty bins
  std::vector<double> empirical_mean;           ///< NaN for empty bins
  double auc = 0.0;
  double accuracy = 0.0;
  double precision = 0.0;                       ///< 0 when nothing is predicted positive
  double recall = 0.0;
};

/// Calibration of b against observed B over labeled rows (group != kUnlabeled).
/// Bins are equal-width on [0,1], the last one closed. AUC is the rank-sum statistic
/// with average ranks for ties; classification metrics threshold b at 0.5.
CalibrationReport calibration_report(std::span<const double> b, std::span<const std::int8_t> group, int n_bins = 10);

nlohmann::json to_json(const CalibrationReport& r);

struct Recalibration {
  Eigen::VectorXd values;
  double intercept = 0.0;
  double slope = 0.0;
  /// Set when the labeled B are all equal: the fit is flat and carries no signal.
  bool degenerate = false;
};

/// Least-squares fit of B on (1, b) over labeled rows, applied to every row and
/// clipped to [0,1]. Throws kInsufficientLabels with fewer than two labeled rows
/// and kDegenerateVariance when b is constant on them.
Recalibration recalibrate(std::span<const double> b, std::span<const std::int8_t> group);

}  // namespace fairbound
