#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

namespace fairbound {

enum class ModelFamily { kLogisticRegression, kMlp1x8Relu, kLinearRegression };

std::string_view to_string(ModelFamily f);
/// Accepts logistic_regression, mlp_1x8_relu, linear_regression. Throws kUnsupported.
ModelFamily parse_model_family(std::string_view name);

/// A differentiable scorer h(x) over p features.
///
/// Parameters are one flat vector. Linear families: [w (p), c]. The MLP has one
/// hidden layer of 8 ReLU units: [W1 (8 x p, row-major), b1 (8), w2 (8), c].
/// The logit z(x) is the last affine output; scores are sigmoid(z) for the
/// classifiers and z itself for linear regression.
class Model {
 public:
  static constexpr int kHiddenUnits = 8;

  Model() = default;
  /// Zero parameters for linear families; the MLP gets He-scaled random
  /// first-layer weights drawn from (seed, "init").
  Model(ModelFamily family, Eigen::Index num_features, std::uint64_t seed = 0);
  Model(ModelFamily family, Eigen::Index num_features, Eigen::VectorXd parameters);

  static Eigen::Index parameter_count(ModelFamily family, Eigen::Index num_features);

  ModelFamily family() const { return family_; }
  Eigen::Index num_features() const { return p_; }
  const Eigen::VectorXd& parameters() const { return theta_; }
  void set_parameters(const Eigen::VectorXd& theta);
  bool is_classifier() const { return family_ != ModelFamily::kLinearRegression; }

  Eigen::VectorXd logits(const Eigen::MatrixXd& X) const;
  Eigen::VectorXd scores(const Eigen::MatrixXd& X) const;
  /// Derivative of score with respect to logit, given the logits.
  Eigen::VectorXd score_derivative(const Eigen::VectorXd& z) const;

  /// Gradient of sum_i dz_i * z_i(theta) with respect to theta.
  Eigen::VectorXd pullback(const Eigen::MatrixXd& X, const Eigen::VectorXd& dz) const;

  /// Mean binary cross-entropy (classifiers) or mean squared error (regression).
  double loss(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) const;
  /// Per-row derivative of the mean loss with respect to the logits.
  Eigen::VectorXd loss_logit_gradient(const Eigen::VectorXd& z, const Eigen::VectorXd& y) const;

 private:
  ModelFamily family_ = ModelFamily::kLogisticRegression;
  Eigen::Index p_ = 0;
  Eigen::VectorXd theta_;
};

double sigmoid(double z);

/// Hard labels (score >= 0.5) as 0/1 doubles.
Eigen::VectorXd hard_labels(const Eigen::VectorXd& scores);

/// Fraction of rows whose hard label equals y.
double accuracy(const Eigen::VectorXd& scores, const Eigen::VectorXd& y);

nlohmann::json to_json(const Model& m, std::string_view feature_schema_hash);
/// Inverse of to_json; the stored schema hash is returned through `schema_hash`.
Model model_from_json(const nlohmann::json& j, std::string* schema_hash = nullptr);

}  // namespace fairbound
