#include "fairbound/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/core.h>

#include "fairbound/estimators.hpp"
#include "fairbound/random.hpp"

namespace fairbound {
namespace {

double side_sign(Side s) { return s == Side::kPositive ? 1.0 : -1.0; }

std::span<const double> as_span(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

// Relaxed statistic f(score, y) and its derivative with respect to the score.
void relax(Statistic stat, const Eigen::VectorXd& score, const Eigen::VectorXd& y, Eigen::VectorXd& f,
           Eigen::VectorXd& df) {
  switch (stat) {
    case Statistic::kPredictedPositive:
      f = score;
      df = Eigen::VectorXd::Ones(score.size());
      return;
    case Statistic::kMisclassified:
      f = y.array() + score.array() * (1.0 - 2.0 * y.array());
      df = 1.0 - 2.0 * y.array();
      return;
    case Statistic::kOutcomePositive:
      f = y;
      df = Eigen::VectorXd::Zero(score.size());
      return;
  }
}

std::vector<std::uint8_t> outcome_event(const MetricSpec& metric, const Eigen::VectorXd& y) {
  // Only prediction-independent events reach training, so the labels passed
  // for yhat do not matter.
  return event_mask(metric, as_span(y), as_span(y));
}

void validate_config(const TrainConfig& c) {
  if (c.metric.event_depends_on_prediction()) {
    throw Error(ErrorKind::kUnsupported,
                fmt::format("metric '{}' conditions on the model's own predictions and cannot be trained against",
                            c.metric.name));
  }
  if (!(c.alpha > 0.0)) throw Error(ErrorKind::kValidation, "alpha must be positive");
  if (c.iterations < 1) throw Error(ErrorKind::kValidation, "iterations must be at least 1");
  if (!(c.eta_dual > 0.0)) throw Error(ErrorKind::kValidation, "dual step size must be positive");
  if (!(c.primal_lr > 0.0)) throw Error(ErrorKind::kValidation, "primal learning rate must be positive");
  if (c.primal_steps_per_iter < 0) throw Error(ErrorKind::kValidation, "primal steps per iteration must be >= 0");
  if (c.batch_size < 1) throw Error(ErrorKind::kValidation, "batch size must be at least 1");
  if (c.n_bins < 1) throw Error(ErrorKind::kValidation, "bin count must be at least 1");
}

// Fixed covariance-constraint data: labeled event rows and the coefficients c_i
// with C = sum_i c_i f_i (both covariances are linear in f).
struct LabeledTerms {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  Eigen::VectorXd coef_bB;
  Eigen::VectorXd coef_Bb;
  std::vector<std::size_t> positions;  // positions of these rows in the source dataset

  LabeledTerms(const Dataset& ds, const TrainConfig& config) {
    const auto event = outcome_event(config.metric, ds.outcome());
    std::vector<double> b, B;
    std::vector<std::int64_t> keys;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (!event[i] || !ds.is_labeled(i)) continue;
      positions.push_back(i);
      b.push_back(ds.proxy()[static_cast<Eigen::Index>(i)]);
      B.push_back(ds.group()[i]);
      keys.push_back(ds.row_ids()[i]);
    }
    const auto m = static_cast<Eigen::Index>(positions.size());
    X.resize(m, ds.num_features());
    y.resize(m);
    coef_bB.setZero(m);
    coef_Bb.setZero(m);
    for (Eigen::Index k = 0; k < m; ++k) {
      X.row(k) = ds.features().row(static_cast<Eigen::Index>(positions[static_cast<std::size_t>(k)]));
      y[k] = ds.outcome()[static_cast<Eigen::Index>(positions[static_cast<std::size_t>(k)])];
    }
    if (m == 0) return;
    const double n = static_cast<double>(m);
    double mean_b[2] = {0, 0};
    std::size_t count[2] = {0, 0};
    for (std::size_t k = 0; k < b.size(); ++k) {
      const auto g = static_cast<std::size_t>(B[k]);
      mean_b[g] += b[k];
      ++count[g];
    }
    for (int g = 0; g < 2; ++g) {
      if (count[g]) mean_b[g] /= static_cast<double>(count[g]);
    }
    const auto bins = quantile_bins(b, config.n_bins, keys);
    std::vector<double> bin_sum(static_cast<std::size_t>(config.n_bins), 0.0);
    std::vector<std::size_t> bin_count(bin_sum.size(), 0);
    for (std::size_t k = 0; k < b.size(); ++k) {
      bin_sum[static_cast<std::size_t>(bins[k])] += B[k];
      ++bin_count[static_cast<std::size_t>(bins[k])];
    }
    for (std::size_t k = 0; k < b.size(); ++k) {
      const auto j = static_cast<std::size_t>(bins[k]);
      const auto kk = static_cast<Eigen::Index>(k);
      coef_bB[kk] = (b[k] - mean_b[static_cast<std::size_t>(B[k])]) / n;
      coef_Bb[kk] = (B[k] - bin_sum[j] / static_cast<double>(bin_count[j])) / n;
    }
  }
};

// Gradient of the relaxed Lagrangian for one mini-batch given as rows of X, y, b.
Eigen::VectorXd batch_gradient(const Model& model, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                               const Eigen::VectorXd& b, const LabeledTerms& labeled, const DualState& duals,
                               const TrainConfig& config, Side side, bool* skipped) {
  const double s = side_sign(side);
  const Eigen::VectorXd z = model.logits(X);
  Eigen::VectorXd dz = model.loss_logit_gradient(z, y);
  if (skipped) *skipped = false;

  if (duals.mu_L != 0.0) {
    const auto event = outcome_event(config.metric, y);
    double sum_b = 0.0, bmin = std::numeric_limits<double>::infinity(), bmax = -bmin;
    std::size_t m = 0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      if (!event[static_cast<std::size_t>(i)]) continue;
      ++m;
      sum_b += b[i];
      bmin = std::min(bmin, b[i]);
      bmax = std::max(bmax, b[i]);
    }
    if (m >= 2 && bmin != bmax) {
      const double bbar = sum_b / static_cast<double>(m);
      double sbb = 0.0;
      for (Eigen::Index i = 0; i < y.size(); ++i) {
        if (event[static_cast<std::size_t>(i)]) sbb += (b[i] - bbar) * (b[i] - bbar);
      }
      Eigen::VectorXd score = model.is_classifier() ? z.unaryExpr([](double v) { return sigmoid(v); }) : z;
      Eigen::VectorXd f, df;
      relax(config.metric.statistic, score, y, f, df);
      const Eigen::VectorXd dsdz = model.score_derivative(z);
      for (Eigen::Index i = 0; i < y.size(); ++i) {
        if (!event[static_cast<std::size_t>(i)]) continue;
        dz[i] += s * duals.mu_L * (b[i] - bbar) / sbb * df[i] * dsdz[i];
      }
    } else if (skipped) {
      *skipped = true;
    }
  }
  Eigen::VectorXd grad = model.pullback(X, dz);

  if (config.enforce_covariances && (duals.mu_b_given_B != 0.0 || duals.mu_B_given_b != 0.0) &&
      labeled.X.rows() > 0) {
    const Eigen::VectorXd zl = model.logits(labeled.X);
    Eigen::VectorXd score = model.is_classifier() ? zl.unaryExpr([](double v) { return sigmoid(v); }) : zl;
    Eigen::VectorXd f, df;
    relax(config.metric.statistic, score, labeled.y, f, df);
    const Eigen::VectorXd coef = -s * (duals.mu_b_given_B * labeled.coef_bB + duals.mu_B_given_b * labeled.coef_Bb);
    const Eigen::VectorXd dzl = coef.cwiseProduct(df).cwiseProduct(model.score_derivative(zl));
    grad += model.pullback(labeled.X, dzl);
  }
  return grad;
}

struct HardEvaluation {
  double loss = 0.0;
  double d_lin = 0.0;
  double cov_bB = 0.0;
  double cov_Bb = 0.0;
};

HardEvaluation evaluate_hard(const Model& model, const Dataset& train, const std::vector<std::size_t>& labeled_pos,
                             const TrainConfig& config) {
  HardEvaluation out;
  out.loss = model.loss(train.features(), train.outcome());
  const Eigen::VectorXd labels = hard_labels(model.scores(train.features()));
  const auto y = as_span(train.outcome());
  const auto f = statistic_values(config.metric, as_span(labels), y);
  const auto event = event_mask(config.metric, as_span(labels), y);
  const auto b = as_span(train.proxy());
  out.d_lin = linear_estimator(f, b, event);
  if (config.enforce_covariances) {
    std::vector<double> fl, bl;
    std::vector<std::int8_t> gl;
    std::vector<std::uint8_t> el;
    std::vector<std::int64_t> ids;
    for (auto i : labeled_pos) {
      fl.push_back(f[i]);
      bl.push_back(b[i]);
      gl.push_back(train.group()[i]);
      el.push_back(event[i]);
      ids.push_back(train.row_ids()[i]);
    }
    out.cov_bB = cov_f_b_given_B(fl, bl, gl, el);
    out.cov_Bb = cov_f_B_given_b(fl, bl, gl, el, config.n_bins, ids);
  }
  return out;
}

struct Violations {
  double d_lin = 0.0, cov_bB = 0.0, cov_Bb = 0.0;
  double max() const { return std::max({d_lin, cov_bB, cov_Bb}); }
};

Violations violations(const HardEvaluation& e, const TrainConfig& config, Side side) {
  const double s = side_sign(side);
  Violations v;
  v.d_lin = s * e.d_lin - config.alpha;
  if (config.enforce_covariances) {
    v.cov_bB = -s * e.cov_bB;
    v.cov_Bb = -s * e.cov_Bb;
  } else {
    v.cov_bB = v.cov_Bb = -std::numeric_limits<double>::infinity();
  }
  return v;
}

class Adam {
 public:
  explicit Adam(Eigen::Index dim, double lr) : lr_(lr), m_(Eigen::VectorXd::Zero(dim)), v_(Eigen::VectorXd::Zero(dim)) {}

  void step(Eigen::VectorXd& theta, const Eigen::VectorXd& g) {
    constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
    ++t_;
    m_ = kBeta1 * m_ + (1.0 - kBeta1) * g;
    v_ = kBeta2 * v_ + (1.0 - kBeta2) * g.cwiseAbs2();
    const double c1 = 1.0 - std::pow(kBeta1, t_);
    const double c2 = 1.0 - std::pow(kBeta2, t_);
    theta.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + kEps);
  }

 private:
  double lr_;
  int t_ = 0;
  Eigen::VectorXd m_, v_;
};

// Shuffled mini-batch positions; reshuffles each time the permutation is used up.
class BatchStream {
 public:
  BatchStream(std::size_t n, std::size_t batch, std::uint64_t seed)
      : order_(n), batch_(batch), rng_(make_engine(seed, "batches")) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    cursor_ = n;
  }

  std::vector<Eigen::Index> next() {
    if (cursor_ >= order_.size()) {
      std::shuffle(order_.begin(), order_.end(), rng_);
      cursor_ = 0;
    }
    const std::size_t end = std::min(order_.size(), cursor_ + batch_);
    std::vector<Eigen::Index> out(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                                  order_.begin() + static_cast<std::ptrdiff_t>(end));
    cursor_ = end;
    return out;
  }

  std::size_t steps_per_epoch() const { return (order_.size() + batch_ - 1) / batch_; }

 private:
  std::vector<std::size_t> order_;
  std::size_t batch_;
  std::size_t cursor_;
  Engine rng_;
};

int steps_per_iteration(const TrainConfig& config, const BatchStream& stream) {
  return config.primal_steps_per_iter > 0 ? config.primal_steps_per_iter
                                          : static_cast<int>(stream.steps_per_epoch());
}

void check_training_inputs(const Dataset& train, const TrainConfig& config) {
  if (train.size() == 0) throw Error(ErrorKind::kValidation, "training split is empty");
  const auto event = outcome_event(config.metric, train.outcome());
  std::size_t n_event = 0, n_labeled_event = 0;
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (!event[i]) continue;
    ++n_event;
    if (train.is_labeled(i)) ++n_labeled_event;
  }
  if (n_event < 2) {
    throw Error(ErrorKind::kEmptyEvent,
                fmt::format("metric '{}': only {} training rows fall in its event", config.metric.name, n_event));
  }
  if (train.num_labeled() == 0) {
    throw Error(ErrorKind::kInsufficientLabels,
                "no labeled rows in the training split; provide protected labels or raise the labeled fraction");
  }
  if (config.enforce_covariances && n_labeled_event < 2) {
    throw Error(ErrorKind::kInsufficientLabels,
                fmt::format("metric '{}': {} labeled training rows fall in its event, need at least 2; raise the "
                            "labeled fraction",
                            config.metric.name, n_labeled_event));
  }
}

}  // namespace

std::string_view to_string(Side s) { return s == Side::kPositive ? "positive" : "negative"; }

LagrangianValue empirical_lagrangian(const Model& model, const Dataset& batch, const Dataset& labeled,
                                     const DualState& duals, const TrainConfig& config, Side side) {
  if (batch.size() == 0) throw Error(ErrorKind::kValidation, "empty batch");
  const double s = side_sign(side);
  LagrangianValue out;
  out.loss = model.loss(batch.features(), batch.outcome());
  out.value = out.loss;

  Eigen::VectorXd f, df;
  relax(config.metric.statistic, model.scores(batch.features()), batch.outcome(), f, df);
  const auto event = outcome_event(config.metric, batch.outcome());
  try {
    out.d_lin = linear_estimator(as_span(f), as_span(batch.proxy()), event);
    out.value += duals.mu_L * (s * *out.d_lin - config.alpha);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kEmptyEvent && e.kind() != ErrorKind::kDegenerateVariance) throw;
  }

  if (config.enforce_covariances) {
    Eigen::VectorXd fl, dfl;
    relax(config.metric.statistic, model.scores(labeled.features()), labeled.outcome(), fl, dfl);
    const auto levent = outcome_event(config.metric, labeled.outcome());
    out.cov_b_given_B = cov_f_b_given_B(as_span(fl), as_span(labeled.proxy()), labeled.group(), levent);
    out.cov_B_given_b = cov_f_B_given_b(as_span(fl), as_span(labeled.proxy()), labeled.group(), levent,
                                        config.n_bins, labeled.row_ids());
    out.value -= s * (duals.mu_b_given_B * out.cov_b_given_B + duals.mu_B_given_b * out.cov_B_given_b);
  }
  return out;
}

Eigen::VectorXd lagrangian_gradient(const Model& model, const Dataset& batch, const Dataset& labeled,
                                    const DualState& duals, const TrainConfig& config, Side side) {
  if (batch.size() == 0) throw Error(ErrorKind::kValidation, "empty batch");
  const LabeledTerms terms(labeled, config);
  return batch_gradient(model, batch.features(), batch.outcome(), batch.proxy(), terms, duals, config, side,
                        nullptr);
}

Dataset training_rows(const Dataset& ds, const Split& split) {
  return ds.subset_by_ids(split.train_ids).keep_labels_for(split.labeled_ids);
}

TrainResult primal_dual_train(const Dataset& ds, const Split& split, const TrainConfig& config, Side side) {
  validate_config(config);
  const Dataset train = training_rows(ds, split);
  check_training_inputs(train, config);
  const auto labeled_pos = train.labeled_positions();
  const LabeledTerms terms(train, config);

  Model model(config.family, train.num_features(), config.seed);
  Eigen::VectorXd theta = model.parameters();
  Adam adam(theta.size(), config.primal_lr);
  BatchStream stream(train.size(), static_cast<std::size_t>(config.batch_size), config.seed);
  const int steps = steps_per_iteration(config, stream);

  TrainResult result;
  result.side = side;
  result.log.reserve(static_cast<std::size_t>(config.iterations));
  result.iterates.reserve(static_cast<std::size_t>(config.iterations));
  DualState duals;
  for (int t = 1; t <= config.iterations; ++t) {
    IterateRecord rec;
    rec.iteration = t;
    rec.duals = duals;
    for (int k = 0; k < steps; ++k) {
      const auto idx = stream.next();
      const Eigen::MatrixXd X = train.features()(idx, Eigen::all);
      const Eigen::VectorXd y = train.outcome()(idx);
      const Eigen::VectorXd b = train.proxy()(idx);
      bool skipped = false;
      const Eigen::VectorXd g = batch_gradient(model, X, y, b, terms, duals, config, side, &skipped);
      if (skipped) ++rec.skipped_batches;
      adam.step(theta, g);
      model.set_parameters(theta);
    }
    const HardEvaluation e = evaluate_hard(model, train, labeled_pos, config);
    rec.loss = e.loss;
    rec.d_lin = e.d_lin;
    rec.cov_b_given_B = e.cov_bB;
    rec.cov_B_given_b = e.cov_Bb;
    if (!std::isfinite(e.loss) || !theta.allFinite()) {
      result.log.push_back(rec);
      throw TrainingAborted(fmt::format("non-finite training loss at iteration {}", t), std::move(result.log));
    }
    const Violations v = violations(e, config, side);
    rec.max_violation = v.max();
    rec.feasible = rec.max_violation <= kFeasibilityTolerance;
    result.feasible_found = result.feasible_found || rec.feasible;
    result.log.push_back(rec);
    result.iterates.push_back(model);

    duals.mu_L = std::max(0.0, duals.mu_L + config.eta_dual * v.d_lin);
    if (config.enforce_covariances) {
      duals.mu_b_given_B = std::max(0.0, duals.mu_b_given_B + config.eta_dual * v.cov_bB);
      duals.mu_B_given_b = std::max(0.0, duals.mu_B_given_b + config.eta_dual * v.cov_Bb);
    }
  }
  return result;
}

Model train_unconstrained(const Dataset& ds, const Split& split, const TrainConfig& config) {
  validate_config(config);
  const Dataset train = training_rows(ds, split);
  if (train.size() == 0) throw Error(ErrorKind::kValidation, "training split is empty");
  Model model(config.family, train.num_features(), config.seed);
  Eigen::VectorXd theta = model.parameters();
  Adam adam(theta.size(), config.primal_lr);
  BatchStream stream(train.size(), static_cast<std::size_t>(config.batch_size), config.seed);
  const int steps = steps_per_iteration(config, stream);
  for (int t = 1; t <= config.iterations; ++t) {
    for (int k = 0; k < steps; ++k) {
      const auto idx = stream.next();
      const Eigen::MatrixXd X = train.features()(idx, Eigen::all);
      const Eigen::VectorXd y = train.outcome()(idx);
      adam.step(theta, model.pullback(X, model.loss_logit_gradient(model.logits(X), y)));
      model.set_parameters(theta);
    }
    if (!theta.allFinite()) {
      throw Error(ErrorKind::kNonFinite, fmt::format("non-finite parameters at iteration {}", t));
    }
  }
  return model;
}

Selection select_iterate(const TrainResult& a, const TrainResult& b) {
  struct Candidate {
    const TrainResult* run;
    std::size_t index;
  };
  // Strict weak order on (key, positive side first, earlier iterate).
  auto better = [](double ka, const Candidate& ca, double kb, const Candidate& cb) {
    if (ka != kb) return ka < kb;
    if (ca.run->side != cb.run->side) return ca.run->side == Side::kPositive;
    return ca.index < cb.index;
  };
  std::optional<Candidate> best_feasible, least_violating;
  for (const TrainResult* run : {&a, &b}) {
    for (std::size_t i = 0; i < run->log.size(); ++i) {
      const auto& rec = run->log[i];
      const Candidate c{run, i};
      if (rec.feasible &&
          (!best_feasible || better(rec.loss, c, best_feasible->run->log[best_feasible->index].loss, *best_feasible))) {
        best_feasible = c;
      }
      if (!least_violating || better(rec.max_violation, c,
                                     least_violating->run->log[least_violating->index].max_violation,
                                     *least_violating)) {
        least_violating = c;
      }
    }
  }
  const auto chosen = best_feasible ? best_feasible : least_violating;
  if (!chosen) throw Error(ErrorKind::kValidation, "no iterates to select from");
  Selection s;
  s.model = chosen->run->iterates.at(chosen->index);
  s.side = chosen->run->side;
  s.iteration = chosen->run->log[chosen->index].iteration;
  s.loss = chosen->run->log[chosen->index].loss;
  s.feasible_found = best_feasible.has_value();
  return s;
}

Selection train_labeled_only(const Dataset& ds, const Split& split, const TrainConfig& config) {
  const Dataset labeled = ds.subset_by_ids(split.labeled_ids);
  if (labeled.size() == 0) throw Error(ErrorKind::kInsufficientLabels, "labeled subset is empty");
  Eigen::VectorXd truth(static_cast<Eigen::Index>(labeled.size()));
  for (std::size_t i = 0; i < labeled.size(); ++i) {
    if (!labeled.is_labeled(i)) {
      throw Error(ErrorKind::kInsufficientLabels, "labeled subset contains a row without a group label");
    }
    truth[static_cast<Eigen::Index>(i)] = labeled.group()[i];
  }
  const Dataset with_truth = labeled.with_proxy(truth);
  Split own;
  own.train_ids = split.labeled_ids;
  own.labeled_ids = split.labeled_ids;
  own.seed = split.seed;
  TrainConfig c = config;
  c.enforce_covariances = false;
  auto pos = primal_dual_train(with_truth, own, c, Side::kPositive);
  auto neg = primal_dual_train(with_truth, own, c, Side::kNegative);
  // With b = B both covariances vanish, so each side alone bounds the disparity in
  // one direction only. An iterate counts as feasible when |D| <= alpha.
  for (TrainResult* run : {&pos, &neg}) {
    run->feasible_found = false;
    for (auto& rec : run->log) {
      rec.max_violation = std::abs(rec.d_lin) - c.alpha;
      rec.feasible = rec.max_violation <= kFeasibilityTolerance;
      run->feasible_found = run->feasible_found || rec.feasible;
    }
  }
  return select_iterate(pos, neg);
}

AveragedBoundReport averaged_bound_check(const TrainResult& result, const Dataset& holdout,
                                         const TrainConfig& config) {
  AveragedBoundReport r;
  std::size_t n_true = 0;
  for (const Model& m : result.iterates) {
    const Eigen::VectorXd scores = m.scores(holdout.features());
    const DisparityReport rep = audit(holdout, as_span(scores), config.metric, config.n_bins);
    r.avg_cov_b_given_B += rep.cov_b_given_B;
    r.avg_cov_B_given_b += rep.cov_B_given_b;
    r.avg_d_lin += rep.d_lin;
    r.avg_se_lin += rep.se_lin;
    if (rep.d_true) {
      r.avg_d_true += *rep.d_true;
      ++n_true;
    }
    ++r.iterates;
  }
  if (r.iterates == 0) return r;
  const auto n = static_cast<double>(r.iterates);
  r.avg_cov_b_given_B /= n;
  r.avg_cov_B_given_b /= n;
  r.avg_d_lin /= n;
  r.avg_se_lin /= n;
  if (n_true) r.avg_d_true /= static_cast<double>(n_true);
  const double s = side_sign(result.side);
  r.covariances_hold = s * r.avg_cov_b_given_B >= 0.0 && s * r.avg_cov_B_given_b >= 0.0;
  r.bound_holds = n_true > 0 && s * r.avg_d_true <= s * r.avg_d_lin;
  r.bound_holds_within_2se = n_true > 0 && s * r.avg_d_true <= s * r.avg_d_lin + 2.0 * r.avg_se_lin;
  return r;
}

nlohmann::json to_json(const AveragedBoundReport& r) {
  return {{"iterates", r.iterates},
          {"avg_cov_b_given_B", r.avg_cov_b_given_B},
          {"avg_cov_B_given_b", r.avg_cov_B_given_b},
          {"avg_d_lin", r.avg_d_lin},
          {"avg_d_true", r.avg_d_true},
          {"avg_se_lin", r.avg_se_lin},
          {"covariances_hold", r.covariances_hold},
          {"bound_holds", r.bound_holds},
          {"bound_holds_within_2se", r.bound_holds_within_2se}};
}

}  // namespace fairbound
