#include "avtpids/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "avtpids/errors.hpp"
#include "doctest.h"

using namespace avtpids;

namespace {

double u01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Independent confusion tally used to cross-check the sweep's internal one.
ConfusionMatrix recount(const std::vector<double>& scores,
                        const std::vector<std::uint8_t>& labels, double beta) {
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] > beta;
    if (pred && labels[i]) {
      ++cm.tp;
    } else if (pred && !labels[i]) {
      ++cm.fp;
    } else if (!pred && labels[i]) {
      ++cm.fn;
    } else {
      ++cm.tn;
    }
  }
  return cm;
}

}  // namespace

// ===========================================================================
// error_stats
// ===========================================================================

TEST_CASE("error_stats: constant list has zero spread") {
  const ErrorStats s = error_stats({1.0, 1.0, 1.0, 1.0});
  CHECK(s.mu == 1.0);
  CHECK(s.sigma == 0.0);
}

TEST_CASE("error_stats: {0,2} gives unit mean and unit sigma") {
  const ErrorStats s = error_stats({0.0, 2.0});
  CHECK(s.mu == 1.0);
  CHECK(s.sigma == 1.0);
}

TEST_CASE("error_stats: population (not sample) standard deviation") {
  // Sample std of {0, 2} over n-1 would be sqrt(2); population std is 1.
  const ErrorStats s = error_stats({0.0, 2.0});
  CHECK(s.sigma != doctest::Approx(std::sqrt(2.0)).epsilon(1e-9));
  CHECK(s.sigma == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("error_stats: 10k seeded samples match an independent two-pass oracle") {
  std::mt19937_64 rng(20240817);
  std::vector<double> errors(10000);
  for (double& e : errors) {
    // Right-skewed positive values, the shape reconstruction errors take.
    e = std::exp(-2.0 + 1.5 * (u01(rng) + u01(rng) - 1.0));
  }
  const ErrorStats s = error_stats(errors);

  // Oracle: two-pass computation in extended precision.
  long double sum = 0.0L;
  for (double e : errors) sum += e;
  const long double mu = sum / static_cast<long double>(errors.size());
  long double sq = 0.0L;
  for (double e : errors) {
    const long double d = static_cast<long double>(e) - mu;
    sq += d * d;
  }
  const long double sigma = sqrtl(sq / static_cast<long double>(errors.size()));

  CHECK(std::abs(s.mu - static_cast<double>(mu)) <= 1e-12 * std::abs(static_cast<double>(mu)));
  CHECK(std::abs(s.sigma - static_cast<double>(sigma)) <=
        1e-12 * std::abs(static_cast<double>(sigma)));
}

TEST_CASE("error_stats: rejects empty and non-finite input") {
  CHECK_THROWS_AS(error_stats({}), InvalidArgumentError);
  CHECK_THROWS_AS(error_stats({1.0, std::numeric_limits<double>::quiet_NaN()}),
                  InvalidArgumentError);
  CHECK_THROWS_AS(error_stats({1.0, std::numeric_limits<double>::infinity()}),
                  InvalidArgumentError);
}

// ===========================================================================
// classify
// ===========================================================================

TEST_CASE("classify: score above the threshold is abnormal") {
  const double mu = 0.3, sigma = 0.05;
  CHECK(classify(mu + sigma, mu + 0.5 * sigma) == 1);
}

TEST_CASE("classify: zero score under a positive threshold is normal") {
  CHECK(classify(0.0, 0.2) == 0);
}

TEST_CASE("classify: a score exactly at the threshold is normal") {
  CHECK(classify(0.7, 0.7) == 0);
  CHECK(classify(-1.25, -1.25) == 0);
}

TEST_CASE("classify: non-finite threshold is rejected, NaN score is normal") {
  CHECK_THROWS_AS(classify(1.0, std::numeric_limits<double>::quiet_NaN()),
                  InvalidArgumentError);
  CHECK_THROWS_AS(classify(1.0, std::numeric_limits<double>::infinity()),
                  InvalidArgumentError);
  CHECK(classify(std::numeric_limits<double>::quiet_NaN(), 0.0) == 0);
}

TEST_CASE("classify: raising the threshold never flips a decision to abnormal") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    const double s = 10.0 * (u01(rng) - 0.5);
    const double b1 = 10.0 * (u01(rng) - 0.5);
    const double b2 = b1 + 5.0 * u01(rng);  // b2 >= b1
    CHECK(classify(s, b1) >= classify(s, b2));
  }
}

// ===========================================================================
// sweep_and_select
// ===========================================================================

TEST_CASE("sweep: nine candidates on the exact alpha grid") {
  const ErrorStats stats{2.0, 0.5};
  const std::vector<double> scores{1.0, 1.1, 3.0, 3.2};
  const std::vector<std::uint8_t> labels{0, 0, 1, 1};
  const ThresholdSweep sweep = sweep_and_select(stats, scores, labels);

  REQUIRE(sweep.candidates.size() == 9);
  for (std::size_t i = 0; i < 9; ++i) {
    const double alpha = -2.0 + 0.5 * static_cast<double>(i);
    CHECK(sweep.candidates[i].alpha == alpha);
    CHECK(sweep.candidates[i].beta == stats.mu + alpha * stats.sigma);
  }
}

TEST_CASE("sweep: perfectly separated scores select the smallest perfect threshold") {
  // Normals cluster near 1.0, anomalies at 3.0; stats mu=1, sigma=0.5 put
  // candidates at {0, 0.25, ..., 2.0}.  Every candidate in (1.05, 3.0)
  // scores F1 = 1, so the tie resolves to the smallest: beta = 1.25.
  const ErrorStats stats{1.0, 0.5};
  std::vector<double> scores{0.95, 1.00, 1.05, 0.98, 1.02};
  std::vector<std::uint8_t> labels(scores.size(), 0);
  for (int i = 0; i < 4; ++i) {
    scores.push_back(3.0);
    labels.push_back(1);
  }

  const ThresholdSweep sweep = sweep_and_select(stats, scores, labels);
  CHECK(sweep.best().f1 == 1.0);
  CHECK(sweep.best().alpha == 0.5);
  CHECK(sweep.best().beta == 1.25);
  // The perfect candidates above it tie on F1 but lose on beta.
  CHECK(sweep.candidates[6].f1 == 1.0);
  CHECK(sweep.best_index == 5);
}

TEST_CASE("sweep: degenerate sigma collapses all candidates onto mu") {
  const ErrorStats stats{0.4, 0.0};
  const std::vector<double> scores{0.1, 0.2, 0.9, 1.0};
  const std::vector<std::uint8_t> labels{0, 0, 1, 1};
  const ThresholdSweep sweep = sweep_and_select(stats, scores, labels);
  for (const SweepCandidate& c : sweep.candidates) {
    CHECK(c.beta == 0.4);
    CHECK(c.f1 == 1.0);
  }
  CHECK(sweep.best_index == 0);
}

TEST_CASE("sweep: agrees with exhaustive recomputation on random data") {
  std::mt19937_64 rng(991);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 40 + static_cast<std::size_t>(rng() % 120);
    std::vector<double> scores(n);
    std::vector<std::uint8_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      labels[i] = static_cast<std::uint8_t>(rng() % 3 == 0);
      // Overlapping clusters so no candidate is trivially perfect.
      scores[i] = labels[i] ? 0.6 + 0.8 * u01(rng) : 0.9 * u01(rng);
    }
    if (std::count(labels.begin(), labels.end(), 1) == 0) labels[0] = 1;
    if (std::count(labels.begin(), labels.end(), 0) == 0) labels[1] = 0;

    const ErrorStats stats{0.45, 0.3};
    const ThresholdSweep sweep = sweep_and_select(stats, scores, labels);

    REQUIRE(sweep.candidates.size() == 9);
    double best_f1 = -1.0;
    std::size_t best_idx = 0;
    for (std::size_t i = 0; i < 9; ++i) {
      const SweepCandidate& c = sweep.candidates[i];
      const ConfusionMatrix cm = recount(scores, labels, c.beta);
      CHECK(cm == c.cm);
      const double p = cm.tp + cm.fp ? double(cm.tp) / double(cm.tp + cm.fp) : 0.0;
      const double r = cm.tp + cm.fn ? double(cm.tp) / double(cm.tp + cm.fn) : 0.0;
      const double f = p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
      CHECK(c.precision == doctest::Approx(p).epsilon(1e-15));
      CHECK(c.recall == doctest::Approx(r).epsilon(1e-15));
      CHECK(c.f1 == doctest::Approx(f).epsilon(1e-15));
      if (c.f1 > best_f1) {
        best_f1 = c.f1;
        best_idx = i;
      }
    }
    CHECK(sweep.best_index == best_idx);
    // Selection optimality: the winner beats or ties every candidate.
    for (const SweepCandidate& c : sweep.candidates) CHECK(sweep.best().f1 >= c.f1);
  }
}

TEST_CASE("sweep: scaling errors and stats by a positive constant changes nothing") {
  std::mt19937_64 rng(4242);
  const std::size_t n = 80;
  std::vector<double> scores(n);
  std::vector<std::uint8_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = static_cast<std::uint8_t>(rng() % 4 == 0);
    scores[i] = labels[i] ? 0.5 + u01(rng) : 0.8 * u01(rng);
  }
  labels[0] = 1;
  labels[1] = 0;

  const ErrorStats stats{0.4, 0.25};
  const ThresholdSweep base = sweep_and_select(stats, scores, labels);

  for (double c : {3.7, 0.01, 250.0}) {
    std::vector<double> scaled(scores);
    for (double& s : scaled) s *= c;
    const ErrorStats scaled_stats{stats.mu * c, stats.sigma * c};
    const ThresholdSweep got = sweep_and_select(scaled_stats, scaled, labels);
    CHECK(got.best_index == base.best_index);
    for (std::size_t i = 0; i < 9; ++i) {
      CHECK(got.candidates[i].cm == base.candidates[i].cm);
      CHECK(got.candidates[i].f1 == doctest::Approx(base.candidates[i].f1).epsilon(1e-12));
    }
  }
}

TEST_CASE("sweep: per-candidate decisions are monotone in beta") {
  std::mt19937_64 rng(5150);
  const std::size_t n = 60;
  std::vector<double> scores(n);
  std::vector<std::uint8_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = static_cast<std::uint8_t>(i % 5 == 0);
    scores[i] = 2.0 * u01(rng);
  }
  const ThresholdSweep sweep = sweep_and_select(ErrorStats{1.0, 0.4}, scores, labels);
  // Raising beta can only shrink the predicted-positive set.
  for (std::size_t i = 1; i < sweep.candidates.size(); ++i) {
    const auto& lo = sweep.candidates[i - 1].cm;
    const auto& hi = sweep.candidates[i].cm;
    CHECK(hi.tp + hi.fp <= lo.tp + lo.fp);
  }
}

TEST_CASE("sweep: input validation") {
  const ErrorStats ok{1.0, 0.5};
  const std::vector<double> scores{0.5, 1.5};
  const std::vector<std::uint8_t> both{0, 1};

  CHECK_THROWS_AS(sweep_and_select(ok, {}, {}), InvalidArgumentError);
  CHECK_THROWS_AS(sweep_and_select(ok, scores, {0}), InvalidArgumentError);
  CHECK_THROWS_AS(sweep_and_select(ok, scores, {0, 0}), InvalidArgumentError);
  CHECK_THROWS_AS(sweep_and_select(ok, scores, {1, 1}), InvalidArgumentError);
  CHECK_THROWS_AS(sweep_and_select(ErrorStats{1.0, -0.1}, scores, both),
                  InvalidArgumentError);
  CHECK_THROWS_AS(
      sweep_and_select(ErrorStats{std::numeric_limits<double>::quiet_NaN(), 0.5}, scores, both),
      InvalidArgumentError);
  CHECK_THROWS_AS(
      sweep_and_select(ok, {0.5, std::numeric_limits<double>::infinity()}, both),
      InvalidArgumentError);
}
