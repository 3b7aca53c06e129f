#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "avtpids/metrics.hpp"

namespace avtpids {

// Mean and standard deviation of reconstruction errors measured on normal
// training windows.  Decision thresholds are expressed as mu + alpha*sigma.
struct ErrorStats {
  double mu = 0.0;
  double sigma = 0.0;  // population standard deviation, >= 0
};

// Population mean/stddev of the given errors.  Throws InvalidArgumentError
// when the list is empty or contains non-finite values.
ErrorStats error_stats(const std::vector<double>& errors);

// 1 (abnormal) iff score > beta; equal scores classify as normal so the rule
// is deterministic at the boundary.  beta must be finite.
int classify(double score, double beta);

// The alpha grid swept when tuning the threshold: [-2, 2] in steps of 0.5.
inline constexpr std::array<double, 9> kSweepAlphas = {-2.0, -1.5, -1.0, -0.5, 0.0,
                                                       0.5,  1.0,  1.5,  2.0};

// One evaluated threshold candidate beta = mu + alpha*sigma.
struct SweepCandidate {
  double alpha = 0.0;
  double beta = 0.0;
  ConfusionMatrix cm;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// All nine candidates (alpha ascending) plus the index of the F1-argmax.
// Ties resolve to the smallest beta, biasing toward recall.
struct ThresholdSweep {
  std::vector<SweepCandidate> candidates;
  std::size_t best_index = 0;

  const SweepCandidate& best() const { return candidates.at(best_index); }
};

// Scores every candidate threshold against a labeled validation set (scores
// are per-window reconstruction errors) and selects the F1 maximizer.
// Throws InvalidArgumentError when lengths differ, the set is empty or
// single-class, a score is non-finite, or the stats are invalid.
ThresholdSweep sweep_and_select(const ErrorStats& stats, const std::vector<double>& scores,
                                const std::vector<std::uint8_t>& labels);

}  // namespace avtpids
