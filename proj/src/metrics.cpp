#include "avtpids/metrics.hpp"

#include <string>

#include "avtpids/errors.hpp"

namespace avtpids {

ConfusionMatrix confusion(const std::vector<std::uint8_t>& predictions,
                          const std::vector<std::uint8_t>& labels) {
  if (predictions.size() != labels.size()) {
    throw InvalidArgumentError("predictions and labels must have equal length (" +
                               std::to_string(predictions.size()) + " vs " +
                               std::to_string(labels.size()) + ")");
  }
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const bool pred = predictions[i] != 0;
    const bool truth = labels[i] != 0;
    if (pred && truth) {
      ++cm.tp;
    } else if (pred && !truth) {
      ++cm.fp;
    } else if (!pred && truth) {
      ++cm.fn;
    } else {
      ++cm.tn;
    }
  }
  return cm;
}

double precision(const ConfusionMatrix& cm) {
  const std::uint64_t denom = cm.tp + cm.fp;
  if (denom == 0) return 0.0;
  return static_cast<double>(cm.tp) / static_cast<double>(denom);
}

double recall(const ConfusionMatrix& cm) {
  const std::uint64_t denom = cm.tp + cm.fn;
  if (denom == 0) return 0.0;
  return static_cast<double>(cm.tp) / static_cast<double>(denom);
}

double f1(const ConfusionMatrix& cm) { return f1_from(precision(cm), recall(cm)); }

double f1_from(double precision, double recall) {
  const double denom = precision + recall;
  if (denom == 0.0) return 0.0;
  return 2.0 * precision * recall / denom;
}

}  // namespace avtpids
