#include "avtpids/calibration.hpp"

#include <cmath>
#include <cstddef>
#include <string>

#include "avtpids/errors.hpp"

namespace avtpids {

ErrorStats error_stats(const std::vector<double>& errors) {
  if (errors.empty()) {
    throw InvalidArgumentError("cannot compute error statistics of an empty list");
  }
  double sum = 0.0;
  for (double e : errors) {
    if (!std::isfinite(e)) {
      throw InvalidArgumentError("error list contains non-finite values");
    }
    sum += e;
  }
  const double n = static_cast<double>(errors.size());
  const double mu = sum / n;
  double sq = 0.0;
  for (double e : errors) {
    const double d = e - mu;
    sq += d * d;
  }
  return ErrorStats{mu, std::sqrt(sq / n)};
}

int classify(double score, double beta) {
  if (!std::isfinite(beta)) {
    throw InvalidArgumentError("decision threshold must be finite");
  }
  return score > beta ? 1 : 0;
}

ThresholdSweep sweep_and_select(const ErrorStats& stats, const std::vector<double>& scores,
                                const std::vector<std::uint8_t>& labels) {
  if (!std::isfinite(stats.mu) || !std::isfinite(stats.sigma) || stats.sigma < 0.0) {
    throw InvalidArgumentError("error statistics must be finite with sigma >= 0");
  }
  if (scores.size() != labels.size()) {
    throw InvalidArgumentError("scores and labels must have equal length (" +
                               std::to_string(scores.size()) + " vs " +
                               std::to_string(labels.size()) + ")");
  }
  if (scores.empty()) {
    throw InvalidArgumentError("threshold sweep needs a non-empty validation set");
  }
  for (double s : scores) {
    if (!std::isfinite(s)) {
      throw InvalidArgumentError("validation scores contain non-finite values");
    }
  }
  std::size_t positives = 0;
  for (std::uint8_t l : labels) positives += (l != 0) ? 1 : 0;
  if (positives == 0 || positives == labels.size()) {
    throw InvalidArgumentError("threshold sweep needs both classes in the validation set");
  }

  ThresholdSweep sweep;
  sweep.candidates.reserve(kSweepAlphas.size());
  double best_f1 = -1.0;
  for (double alpha : kSweepAlphas) {
    SweepCandidate cand;
    cand.alpha = alpha;
    cand.beta = stats.mu + alpha * stats.sigma;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const bool pred = scores[i] > cand.beta;
      const bool truth = labels[i] != 0;
      if (pred && truth) {
        ++cand.cm.tp;
      } else if (pred && !truth) {
        ++cand.cm.fp;
      } else if (!pred && truth) {
        ++cand.cm.fn;
      } else {
        ++cand.cm.tn;
      }
    }
    cand.precision = precision(cand.cm);
    cand.recall = recall(cand.cm);
    cand.f1 = f1(cand.cm);
    // Candidates arrive in ascending beta order (sigma >= 0), so a strict
    // improvement rule leaves ties on the smallest beta.
    if (cand.f1 > best_f1) {
      best_f1 = cand.f1;
      sweep.best_index = sweep.candidates.size();
    }
    sweep.candidates.push_back(cand);
  }
  return sweep;
}

}  // namespace avtpids
