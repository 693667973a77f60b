#include "fairbound/metric.hpp"

#include <array>

#include <fmt/core.h>
#include <fmt/ranges.h>

#include "fairbound/error.hpp"

namespace fairbound {
namespace {

constexpr std::array<std::string_view, 6> kSupported = {
    "demographic_parity", "tpr_parity", "fpr_parity", "tnr_parity", "fnr_parity", "accuracy_parity",
};

}  // namespace

std::span<const std::string_view> supported_metrics() { return kSupported; }

MetricSpec metric_spec(std::string_view name) {
  // (f, event) pairs of the standard metric table. Rate-parity rows all use the
  // misclassification indicator; TPR and FNR parity condition on y = 1, FPR and
  // TNR parity on y = 0.
  if (name == "demographic_parity" || name == "dd") {
    return {"demographic_parity", Statistic::kPredictedPositive, Event::kAlways};
  }
  if (name == "tpr_parity" || name == "tprd") {
    return {"tpr_parity", Statistic::kMisclassified, Event::kOutcomePositive};
  }
  if (name == "fpr_parity" || name == "fprd") {
    return {"fpr_parity", Statistic::kMisclassified, Event::kOutcomeNegative};
  }
  if (name == "tnr_parity") return {"tnr_parity", Statistic::kMisclassified, Event::kOutcomeNegative};
  if (name == "fnr_parity") return {"fnr_parity", Statistic::kMisclassified, Event::kOutcomePositive};
  if (name == "accuracy_parity") return {"accuracy_parity", Statistic::kMisclassified, Event::kAlways};
  throw Error(ErrorKind::kUnsupported,
              fmt::format("unsupported metric '{}'; supported single-event metrics: {}", name,
                          fmt::join(kSupported, ", ")));
}

std::string_view to_string(Statistic s) {
  switch (s) {
    case Statistic::kPredictedPositive: return "predicted_positive";
    case Statistic::kMisclassified: return "misclassified";
    case Statistic::kOutcomePositive: return "outcome_positive";
  }
  return "unknown";
}

std::string_view to_string(Event e) {
  switch (e) {
    case Event::kAlways: return "always";
    case Event::kOutcomePositive: return "y=1";
    case Event::kOutcomeNegative: return "y=0";
    case Event::kPredictedPositive: return "yhat=1";
    case Event::kPredictedNegative: return "yhat=0";
  }
  return "unknown";
}

double statistic_value(Statistic s, double predicted_label, double outcome) {
  switch (s) {
    case Statistic::kPredictedPositive: return predicted_label == 1.0 ? 1.0 : 0.0;
    case Statistic::kMisclassified: return predicted_label != outcome ? 1.0 : 0.0;
    case Statistic::kOutcomePositive: return outcome == 1.0 ? 1.0 : 0.0;
  }
  return 0.0;
}

bool in_event(Event e, double predicted_label, double outcome) {
  switch (e) {
    case Event::kAlways: return true;
    case Event::kOutcomePositive: return outcome == 1.0;
    case Event::kOutcomeNegative: return outcome == 0.0;
    case Event::kPredictedPositive: return predicted_label == 1.0;
    case Event::kPredictedNegative: return predicted_label == 0.0;
  }
  return false;
}

std::vector<double> statistic_values(const MetricSpec& metric, std::span<const double> predicted_labels,
                                     std::span<const double> outcomes) {
  std::vector<double> f(predicted_labels.size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = statistic_value(metric.statistic, predicted_labels[i], outcomes[i]);
  return f;
}

std::vector<std::uint8_t> event_mask(const MetricSpec& metric, std::span<const double> predicted_labels,
                                     std::span<const double> outcomes) {
  std::vector<std::uint8_t> mask(predicted_labels.size());
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = in_event(metric.event, predicted_labels[i], outcomes[i]) ? 1 : 0;
  return mask;
}

}  // namespace fairbound
