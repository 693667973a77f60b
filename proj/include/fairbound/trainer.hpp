#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "fairbound/dataset.hpp"
#include "fairbound/error.hpp"
#include "fairbound/metric.hpp"
#include "fairbound/model.hpp"

namespace fairbound {

/// Positive side: D^L <= alpha with both conditional covariances >= 0.
/// Negative side: -alpha <= D^L with both conditional covariances <= 0.
enum class Side { kPositive, kNegative };

std::string_view to_string(Side s);

struct TrainConfig {
  MetricSpec metric = metric_spec("demographic_parity");
  ModelFamily family = ModelFamily::kLogisticRegression;
  double alpha = 0.1;
  int iterations = 1000;
  double eta_dual = 0.005;
  /// Adam steps per dual update; 0 means one pass over the training rows.
  int primal_steps_per_iter = 0;
  double primal_lr = 0.001;
  int batch_size = 1024;
  int n_bins = 10;
  std::uint64_t seed = 0;
  /// When false only the D^L constraint is enforced and checked.
  bool enforce_covariances = true;
};

/// Constraint satisfied iff its violation is at most this.
inline constexpr double kFeasibilityTolerance = 1e-9;

struct DualState {
  double mu_L = 0.0;
  double mu_b_given_B = 0.0;
  double mu_B_given_b = 0.0;
};

struct IterateRecord {
  int iteration = 0;
  double loss = 0.0;           ///< training loss
  double d_lin = 0.0;          ///< hard-label D^L over training event rows
  double cov_b_given_B = 0.0;  ///< hard-label diagnostics over labeled training event rows
  double cov_B_given_b = 0.0;
  DualState duals;             ///< duals in force during this iterate's primal steps
  bool feasible = false;
  double max_violation = 0.0;
  int skipped_batches = 0;     ///< mini-batches whose D^L term had no usable event rows
};

struct TrainResult {
  Side side = Side::kPositive;
  std::vector<IterateRecord> log;
  std::vector<Model> iterates;
  bool feasible_found = false;
};

/// Thrown when the training loss becomes non-finite; carries the log so far.
class TrainingAborted : public Error {
 public:
  TrainingAborted(std::string message, std::vector<IterateRecord> log)
      : Error(ErrorKind::kNonFinite, std::move(message)), log_(std::move(log)) {}
  const std::vector<IterateRecord>& log() const { return log_; }

 private:
  std::vector<IterateRecord> log_;
};

/// Value of the empirical Lagrangian on a mini-batch, with its pieces. Constraint
/// terms use the relaxed statistic (model score in place of the hard label).
struct LagrangianValue {
  double value = 0.0;
  double loss = 0.0;
  /// Relaxed D^L over the batch's event rows; empty when the batch has fewer than
  /// two event rows or constant b among them, in which case the term is dropped.
  std::optional<double> d_lin;
  double cov_b_given_B = 0.0;
  double cov_B_given_b = 0.0;
};

/// loss(batch) + mu_L (s D^L - alpha) - s mu_bB C_{f,b|B} - s mu_Bb C_{f,B|b}, with
/// s = +1 on the positive side and -1 on the negative side. D^L is taken over the
/// batch; the covariances over every labeled row of `labeled`.
LagrangianValue empirical_lagrangian(const Model& model, const Dataset& batch, const Dataset& labeled,
                                     const DualState& duals, const TrainConfig& config, Side side);

/// Gradient of empirical_lagrangian with respect to the model parameters.
Eigen::VectorXd lagrangian_gradient(const Model& model, const Dataset& batch, const Dataset& labeled,
                                    const DualState& duals, const TrainConfig& config, Side side);

/// Training rows of `ds` under `split`, with group labels kept only on labeled ids.
Dataset training_rows(const Dataset& ds, const Split& split);

/// Primal-dual training for one side. Primal steps are Adam on the relaxed
/// Lagrangian; dual steps are projected ascent on hard-label violations.
TrainResult primal_dual_train(const Dataset& ds, const Split& split, const TrainConfig& config, Side side);

/// Plain empirical-risk minimization with the same optimizer, batch stream and
/// epoch budget as primal_dual_train.
Model train_unconstrained(const Dataset& ds, const Split& split, const TrainConfig& config);

struct Selection {
  Model model;
  Side side = Side::kPositive;
  int iteration = 0;
  double loss = 0.0;
  bool feasible_found = false;
};

/// Lowest-loss feasible iterate of each side, then the lower-loss side (ties: the
/// positive side, then the earlier iterate). With no feasible iterate on either side
/// the iterate with the smallest maximum violation is returned, flagged infeasible.
/// The result does not depend on argument order.
Selection select_iterate(const TrainResult& a, const TrainResult& b);

/// Baseline trained only on the labeled training rows with their true groups:
/// the proxy is replaced by B, so the D^L constraint is the true disparity. Both
/// sides are trained and an iterate is feasible when |D| <= alpha.
Selection train_labeled_only(const Dataset& ds, const Split& split, const TrainConfig& config);

/// Averages over all iterates of the hard-label diagnostics, D^L and true
/// disparity measured on `holdout`, and whether the averaged bound holds.
struct AveragedBoundReport {
  std::size_t iterates = 0;
  double avg_cov_b_given_B = 0.0;
  double avg_cov_B_given_b = 0.0;
  double avg_d_lin = 0.0;
  double avg_d_true = 0.0;
  double avg_se_lin = 0.0;
  bool covariances_hold = false;  ///< side-appropriate signs of both averages
  bool bound_holds = false;       ///< avg d_true on the correct side of avg d_lin
  bool bound_holds_within_2se = false;
};

AveragedBoundReport averaged_bound_check(const TrainResult& result, const Dataset& holdout,
                                         const TrainConfig& config);

nlohmann::json to_json(const AveragedBoundReport& r);

}  // namespace fairbound
