#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fairbound {

/// The per-row statistic f(yhat, y) whose group-mean difference a metric measures.
enum class Statistic {
  kPredictedPositive,  // 1[yhat = 1]
  kMisclassified,      // 1[yhat != y]
  kOutcomePositive,    // 1[y = 1]
};

/// The conditioning event of a metric.
enum class Event {
  kAlways,
  kOutcomePositive,     // y = 1
  kOutcomeNegative,     // y = 0
  kPredictedPositive,   // yhat = 1
  kPredictedNegative,   // yhat = 0
};

/// A group fairness metric: E[f | event, B=1] - E[f | event, B=0].
struct MetricSpec {
  std::string name;
  Statistic statistic = Statistic::kPredictedPositive;
  Event event = Event::kAlways;

  /// True when the event depends on the model's predictions. A proxy calibrated
  /// for one model is then not necessarily calibrated within the event of another.
  bool event_depends_on_prediction() const {
    return event == Event::kPredictedPositive || event == Event::kPredictedNegative;
  }

  bool operator==(const MetricSpec&) const = default;
};

/// Built-in single-event metrics: demographic_parity, tpr_parity, fpr_parity,
/// tnr_parity, fnr_parity, accuracy_parity. Short aliases dd, tprd, fprd are
/// accepted. Throws Error(kUnsupported) listing the supported names otherwise.
MetricSpec metric_spec(std::string_view name);

std::span<const std::string_view> supported_metrics();

std::string_view to_string(Statistic s);
std::string_view to_string(Event e);

/// Hard label of a score: 1 when score >= 0.5.
inline double hard_label(double score) { return score >= 0.5 ? 1.0 : 0.0; }

double statistic_value(Statistic s, double predicted_label, double outcome);
bool in_event(Event e, double predicted_label, double outcome);

/// f over rows given hard predicted labels.
std::vector<double> statistic_values(const MetricSpec& metric, std::span<const double> predicted_labels,
                                     std::span<const double> outcomes);
/// 1 for rows inside the metric's event, 0 elsewhere.
std::vector<std::uint8_t> event_mask(const MetricSpec& metric, std::span<const double> predicted_labels,
                                     std::span<const double> outcomes);

}  // namespace fairbound
