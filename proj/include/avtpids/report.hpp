#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "avtpids/calibration.hpp"
#include "avtpids/metrics.hpp"
#include "avtpids/models.hpp"
#include "avtpids/windows.hpp"

namespace avtpids {

// Wall-clock statistics for scoring a window set.  Each repetition times one
// full pass over the set in fixed-size batches; the std is the sample
// standard deviation over repetitions.  Per-batch and per-window figures are
// the same measurements divided by the batch and window counts.
struct LatencyStats {
  double total_mean_s = 0.0;
  double total_std_s = 0.0;
  double batch_mean_s = 0.0;
  double batch_std_s = 0.0;
  double window_mean_s = 0.0;
  double window_std_s = 0.0;
  std::size_t repetitions = 0;
  std::size_t batch_size = 0;
  std::size_t batches = 0;
  std::size_t windows = 0;
};

// Folds raw per-repetition timings (seconds) into LatencyStats.  Throws
// InvalidArgumentError on an empty sample list, zero windows/batch size, or
// negative/non-finite samples.
LatencyStats latency_from_samples(const std::vector<double>& seconds, std::size_t windows,
                                  std::size_t batch_size);

// Runs `body` once untimed as a warm-up, then `repetitions` timed passes.
// `windows` is the number of items one pass scores (used for the derived
// per-window figures).  Single-threaded by design so timings are not
// perturbed by contention.
LatencyStats benchmark_run(const std::function<void()>& body, std::size_t repetitions,
                           std::size_t windows, std::size_t batch_size);

// Times reconstruction-error scoring of the selected windows in batches of
// `batch_size` (default 16, the training batch size).  Throws
// InvalidArgumentError when `indices` is empty or repetitions is 0.
LatencyStats benchmark_inference(Model& model, const WindowSet& windows,
                                 const std::vector<std::size_t>& indices,
                                 std::size_t repetitions, std::size_t batch_size = 16);

// One detector evaluated at one window length: decision quality, timing, and
// model footprint, plus the optional threshold-sweep table behind `beta`.
// The headline latency columns are per window; per-batch figures ride along
// because published inference times rarely state their batching.
struct EvalReport {
  std::string dataset;
  std::string detector;
  std::size_t w = 0;
  double beta = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  ConfusionMatrix cm;
  double latency_mean_s = 0.0;  // per window
  double latency_std_s = 0.0;
  double latency_batch_mean_s = 0.0;  // per batch
  double latency_batch_std_s = 0.0;
  std::size_t params = 0;        // trainable parameter count; 0 for classical models
  std::uint64_t model_bytes = 0; // checkpoint size on disk
  std::vector<SweepCandidate> sweep;  // empty when no sweep was run
};

// JSON round trip.  All numeric fields must be finite; serialization uses
// shortest-round-trip formatting so re-reading reproduces every number
// exactly.  Throws IoError on unwritable/unreadable paths and FormatError on
// malformed or schema-violating input.
void save_report_json(const EvalReport& report, const std::filesystem::path& path);
EvalReport load_report_json(const std::filesystem::path& path);

// The fixed CSV column set (sweep tables are JSON-only).
std::string report_csv_header();

// One row per report under the fixed header.  Doubles are written with
// shortest-round-trip formatting, so load_reports_csv reproduces them
// bitwise.  Dataset/detector ids must not contain commas, quotes, or line
// breaks.
void save_reports_csv(const std::vector<EvalReport>& reports,
                      const std::filesystem::path& path);
std::vector<EvalReport> load_reports_csv(const std::filesystem::path& path);

// Dispatches on format "json" or "csv" (a csv written this way holds a
// single row; merge rows with save_reports_csv).
void emit_report(const EvalReport& report, const std::string& format,
                 const std::filesystem::path& path);

}  // namespace avtpids
