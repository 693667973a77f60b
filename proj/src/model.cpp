#include "fairbound/model.hpp"

#include <cmath>

#include <fmt/core.h>

#include "fairbound/error.hpp"
#include "fairbound/random.hpp"

namespace fairbound {
namespace {

constexpr Eigen::Index kH = Model::kHiddenUnits;

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

}  // namespace

std::string_view to_string(ModelFamily f) {
  switch (f) {
    case ModelFamily::kLogisticRegression: return "logistic_regression";
    case ModelFamily::kMlp1x8Relu: return "mlp_1x8_relu";
    case ModelFamily::kLinearRegression: return "linear_regression";
  }
  return "logistic_regression";
}

ModelFamily parse_model_family(std::string_view name) {
  for (auto f : {ModelFamily::kLogisticRegression, ModelFamily::kMlp1x8Relu, ModelFamily::kLinearRegression}) {
    if (name == to_string(f)) return f;
  }
  throw Error(ErrorKind::kUnsupported,
              fmt::format("unknown model family '{}'; supported: logistic_regression, mlp_1x8_relu, "
                          "linear_regression",
                          name));
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

Eigen::Index Model::parameter_count(ModelFamily family, Eigen::Index p) {
  return family == ModelFamily::kMlp1x8Relu ? kH * p + kH + kH + 1 : p + 1;
}

Model::Model(ModelFamily family, Eigen::Index num_features, std::uint64_t seed)
    : family_(family), p_(num_features), theta_(Eigen::VectorXd::Zero(parameter_count(family, num_features))) {
  if (num_features < 1) throw Error(ErrorKind::kValidation, "model needs at least one feature");
  if (family == ModelFamily::kMlp1x8Relu) {
    Engine rng = make_engine(seed, "init");
    std::normal_distribution<double> first(0.0, std::sqrt(2.0 / static_cast<double>(p_)));
    std::normal_distribution<double> second(0.0, std::sqrt(1.0 / static_cast<double>(kH)));
    for (Eigen::Index k = 0; k < kH * p_; ++k) theta_[k] = first(rng);
    for (Eigen::Index k = 0; k < kH; ++k) theta_[kH * p_ + kH + k] = second(rng);
  }
}

Model::Model(ModelFamily family, Eigen::Index num_features, Eigen::VectorXd parameters)
    : family_(family), p_(num_features) {
  set_parameters(parameters);
}

void Model::set_parameters(const Eigen::VectorXd& theta) {
  if (theta.size() != parameter_count(family_, p_)) {
    throw Error(ErrorKind::kValidation, fmt::format("{} with {} features takes {} parameters, got {}",
                                                    to_string(family_), p_, parameter_count(family_, p_),
                                                    theta.size()));
  }
  theta_ = theta;
}

Eigen::VectorXd Model::logits(const Eigen::MatrixXd& X) const {
  if (X.cols() != p_) {
    throw Error(ErrorKind::kValidation, fmt::format("model expects {} features, got {}", p_, X.cols()));
  }
  if (family_ != ModelFamily::kMlp1x8Relu) {
    return (X * theta_.head(p_)).array() + theta_[p_];
  }
  const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> W1(
      theta_.data(), kH, p_);
  const auto b1 = theta_.segment(kH * p_, kH);
  const auto w2 = theta_.segment(kH * p_ + kH, kH);
  const double c = theta_[kH * p_ + 2 * kH];
  Eigen::MatrixXd hidden = ((X * W1.transpose()).rowwise() + b1.transpose()).cwiseMax(0.0);
  return (hidden * w2).array() + c;
}

Eigen::VectorXd Model::scores(const Eigen::MatrixXd& X) const {
  Eigen::VectorXd z = logits(X);
  if (is_classifier()) z = z.unaryExpr([](double v) { return sigmoid(v); });
  return z;
}

Eigen::VectorXd Model::score_derivative(const Eigen::VectorXd& z) const {
  if (!is_classifier()) return Eigen::VectorXd::Ones(z.size());
  return z.unaryExpr([](double v) {
    const double s = sigmoid(v);
    return s * (1.0 - s);
  });
}

Eigen::VectorXd Model::pullback(const Eigen::MatrixXd& X, const Eigen::VectorXd& dz) const {
  Eigen::VectorXd g(theta_.size());
  if (family_ != ModelFamily::kMlp1x8Relu) {
    g.head(p_) = X.transpose() * dz;
    g[p_] = dz.sum();
    return g;
  }
  const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> W1(
      theta_.data(), kH, p_);
  const auto b1 = theta_.segment(kH * p_, kH);
  const auto w2 = theta_.segment(kH * p_ + kH, kH);
  const Eigen::MatrixXd pre = (X * W1.transpose()).rowwise() + b1.transpose();
  const Eigen::MatrixXd hidden = pre.cwiseMax(0.0);
  // d/d(pre) = dz * w2 masked by the ReLU gate.
  Eigen::MatrixXd dpre = (dz * w2.transpose()).array() * (pre.array() > 0.0).cast<double>();
  const Eigen::MatrixXd dW1 = dpre.transpose() * X;  // 8 x p
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(g.data(), kH, p_) = dW1;
  g.segment(kH * p_, kH) = dpre.colwise().sum().transpose();
  g.segment(kH * p_ + kH, kH) = hidden.transpose() * dz;
  g[kH * p_ + 2 * kH] = dz.sum();
  return g;
}

double Model::loss(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) const {
  const Eigen::VectorXd z = logits(X);
  const auto n = static_cast<double>(z.size());
  if (z.size() == 0) return 0.0;
  double total = 0.0;
  if (is_classifier()) {
    for (Eigen::Index i = 0; i < z.size(); ++i) total += softplus(z[i]) - y[i] * z[i];
  } else {
    total = (z - y).squaredNorm();
  }
  return total / n;
}

Eigen::VectorXd Model::loss_logit_gradient(const Eigen::VectorXd& z, const Eigen::VectorXd& y) const {
  const auto n = static_cast<double>(z.size());
  if (is_classifier()) {
    return (z.unaryExpr([](double v) { return sigmoid(v); }) - y) / n;
  }
  return 2.0 * (z - y) / n;
}

Eigen::VectorXd hard_labels(const Eigen::VectorXd& scores) {
  return scores.unaryExpr([](double s) { return s >= 0.5 ? 1.0 : 0.0; });
}

double accuracy(const Eigen::VectorXd& scores, const Eigen::VectorXd& y) {
  if (scores.size() == 0) return 0.0;
  return (hard_labels(scores).array() == y.array()).cast<double>().mean();
}

nlohmann::json to_json(const Model& m, std::string_view feature_schema_hash) {
  const auto& t = m.parameters();
  return {{"family", std::string(to_string(m.family()))},
          {"num_features", m.num_features()},
          {"parameters", std::vector<double>(t.data(), t.data() + t.size())},
          {"feature_schema_hash", std::string(feature_schema_hash)}};
}

Model model_from_json(const nlohmann::json& j, std::string* schema_hash) {
  try {
    const auto family = parse_model_family(j.at("family").get<std::string>());
    const auto p = j.at("num_features").get<Eigen::Index>();
    const auto params = j.at("parameters").get<std::vector<double>>();
    if (schema_hash) *schema_hash = j.value("feature_schema_hash", "");
    return Model(family, p, Eigen::Map<const Eigen::VectorXd>(params.data(), static_cast<Eigen::Index>(params.size())));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kValidation, fmt::format("malformed model JSON: {}", e.what()));
  }
}

}  // namespace fairbound
