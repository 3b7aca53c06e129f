#pragma once

#include <cstdint>
#include <vector>

namespace avtpids {

// Binary-detection counts.  The positive class is "abnormal" (label 1).
struct ConfusionMatrix {
  std::uint64_t tp = 0;  // predicted 1, labeled 1
  std::uint64_t fp = 0;  // predicted 1, labeled 0
  std::uint64_t tn = 0;  // predicted 0, labeled 0
  std::uint64_t fn = 0;  // predicted 0, labeled 1

  std::uint64_t total() const { return tp + fp + tn + fn; }
  bool operator==(const ConfusionMatrix&) const = default;
};

// Tallies predictions against ground truth.  Any nonzero entry counts as the
// positive class.  Throws InvalidArgumentError when lengths differ.
ConfusionMatrix confusion(const std::vector<std::uint8_t>& predictions,
                          const std::vector<std::uint8_t>& labels);

// TP/(TP+FP); 0 when the denominator is 0.
double precision(const ConfusionMatrix& cm);

// TP/(TP+FN); 0 when the denominator is 0.
double recall(const ConfusionMatrix& cm);

// Harmonic mean of precision and recall; 0 when both are 0.
double f1(const ConfusionMatrix& cm);

// 2pr/(p+r) from already-computed precision/recall; 0 when p+r == 0.
double f1_from(double precision, double recall);

}  // namespace avtpids
