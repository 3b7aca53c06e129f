#include "avtpids/metrics.hpp"
#include "avtpids/report.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "avtpids/errors.hpp"
#include "avtpids/models.hpp"
#include "avtpids/windows.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace avtpids;

namespace {

std::vector<std::uint8_t> random_bits(std::size_t n, std::uint64_t seed, unsigned mod = 2) {
  std::mt19937_64 rng(seed);
  std::vector<std::uint8_t> out(n);
  for (auto& b : out) b = static_cast<std::uint8_t>(rng() % mod == 0);
  return out;
}

WindowSet small_window_set(std::size_t packets, std::size_t w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<FeatureVector> rows(packets);
  for (auto& row : rows) {
    for (auto& b : row) b = static_cast<std::uint8_t>(rng());
  }
  return build_windows(std::move(rows), w);
}

EvalReport sample_report(int salt) {
  EvalReport r;
  r.dataset = "synthetic_" + std::to_string(salt);
  r.detector = "cae";
  r.w = 16;
  r.beta = 0.0123456789012345 + 1e-3 * salt;
  r.cm = ConfusionMatrix{912 + static_cast<std::uint64_t>(salt), 31, 17211, 54};
  r.precision = precision(r.cm);
  r.recall = recall(r.cm);
  r.f1 = f1(r.cm);
  r.latency_mean_s = 1.0 / 3.0 * 1e-4 + 1e-9 * salt;
  r.latency_std_s = 2.5e-6;
  r.latency_batch_mean_s = r.latency_mean_s * 16.0;
  r.latency_batch_std_s = r.latency_std_s * 16.0;
  r.params = 4382593;
  r.model_bytes = 35061000 + static_cast<std::uint64_t>(salt);
  for (int i = 0; i < 9; ++i) {
    SweepCandidate c;
    c.alpha = -2.0 + 0.5 * i;
    c.beta = 0.01 + 0.002 * i;
    c.cm = ConfusionMatrix{900u + static_cast<std::uint64_t>(i), 40, 17200, 60};
    c.precision = precision(c.cm);
    c.recall = recall(c.cm);
    c.f1 = f1(c.cm);
    r.sweep.push_back(c);
  }
  return r;
}

void check_reports_equal(const EvalReport& a, const EvalReport& b) {
  CHECK(a.dataset == b.dataset);
  CHECK(a.detector == b.detector);
  CHECK(a.w == b.w);
  CHECK(a.beta == b.beta);
  CHECK(a.precision == b.precision);
  CHECK(a.recall == b.recall);
  CHECK(a.f1 == b.f1);
  CHECK(a.cm == b.cm);
  CHECK(a.latency_mean_s == b.latency_mean_s);
  CHECK(a.latency_std_s == b.latency_std_s);
  CHECK(a.params == b.params);
  CHECK(a.model_bytes == b.model_bytes);
}

}  // namespace

// ===========================================================================
// Confusion matrix
// ===========================================================================

TEST_CASE("confusion: perfect predictions on a mixed triple") {
  const ConfusionMatrix cm = confusion({1, 0, 1}, {1, 0, 1});
  CHECK(cm.tp == 2);
  CHECK(cm.tn == 1);
  CHECK(cm.fp == 0);
  CHECK(cm.fn == 0);
  CHECK(cm.total() == 3);
}

TEST_CASE("confusion: all-normal predictions miss every positive") {
  const std::vector<std::uint8_t> preds(10, 0);
  std::vector<std::uint8_t> labels(10, 0);
  for (std::size_t i = 0; i < 5; ++i) labels[i] = 1;
  const ConfusionMatrix cm = confusion(preds, labels);
  CHECK(cm.fn == 5);
  CHECK(cm.tn == 5);
  CHECK(cm.tp == 0);
  CHECK(cm.fp == 0);
}

TEST_CASE("confusion: random 1000-pair case matches an independent recount") {
  const auto preds = random_bits(1000, 11, 3);
  const auto labels = random_bits(1000, 22, 4);
  const ConfusionMatrix cm = confusion(preds, labels);

  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (std::size_t i = 0; i < 1000; ++i) {
    if (preds[i] && labels[i]) ++tp;
    if (preds[i] && !labels[i]) ++fp;
    if (!preds[i] && labels[i]) ++fn;
    if (!preds[i] && !labels[i]) ++tn;
  }
  CHECK(cm.tp == tp);
  CHECK(cm.fp == fp);
  CHECK(cm.tn == tn);
  CHECK(cm.fn == fn);
  CHECK(cm.total() == 1000);
}

TEST_CASE("confusion: any nonzero value counts as the positive class") {
  const ConfusionMatrix cm = confusion({2, 0}, {0, 255});
  CHECK(cm.fp == 1);
  CHECK(cm.fn == 1);
}

TEST_CASE("confusion: length mismatch is rejected") {
  CHECK_THROWS_AS(confusion({1, 0}, {1}), InvalidArgumentError);
}

// ===========================================================================
// Precision / recall / F1
// ===========================================================================

TEST_CASE("metrics: published precision/recall pair reproduces its F1") {
  const double f = f1_from(0.9794, 0.5508);
  CHECK(std::llround(f * 1e4) == 7051);
}

TEST_CASE("metrics: degenerate denominators give zero, perfect inputs give one") {
  const ConfusionMatrix no_positives{0, 0, 10, 5};  // tp=0, fp=0
  CHECK(precision(no_positives) == 0.0);
  CHECK(f1(no_positives) == 0.0);

  const ConfusionMatrix no_truth{0, 3, 10, 0};  // tp=0, fn=0
  CHECK(recall(no_truth) == 0.0);
  CHECK(f1(no_truth) == 0.0);

  CHECK(f1_from(1.0, 1.0) == 1.0);
  const ConfusionMatrix perfect{7, 0, 3, 0};
  CHECK(precision(perfect) == 1.0);
  CHECK(recall(perfect) == 1.0);
  CHECK(f1(perfect) == 1.0);
}

TEST_CASE("metrics: identities hold on 1000 random confusion matrices") {
  std::mt19937_64 rng(314159);
  for (int trial = 0; trial < 1000; ++trial) {
    ConfusionMatrix cm;
    cm.tp = rng() % 1000;
    cm.fp = rng() % 1000;
    cm.tn = rng() % 1000;
    cm.fn = rng() % 1000;

    const double p = precision(cm);
    const double r = recall(cm);
    const double f = f1(cm);

    // Independent evaluation in extended precision.
    const long double pe =
        cm.tp + cm.fp ? static_cast<long double>(cm.tp) / (cm.tp + cm.fp) : 0.0L;
    const long double re =
        cm.tp + cm.fn ? static_cast<long double>(cm.tp) / (cm.tp + cm.fn) : 0.0L;
    const long double fe = pe + re > 0.0L ? 2.0L * pe * re / (pe + re) : 0.0L;

    CHECK(std::abs(p - static_cast<double>(pe)) <= 1e-9);
    CHECK(std::abs(r - static_cast<double>(re)) <= 1e-9);
    CHECK(std::abs(f - static_cast<double>(fe)) <= 1e-9);
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
    CHECK(r >= 0.0);
    CHECK(r <= 1.0);
    CHECK(f >= 0.0);
    CHECK(f <= 1.0);
    // Harmonic-mean identity.
    if (p + r > 0.0) CHECK(std::abs(f - 2.0 * p * r / (p + r)) <= 1e-9);
  }
}

// ===========================================================================
// Latency statistics
// ===========================================================================

TEST_CASE("latency: sample standard deviation over repetitions") {
  const LatencyStats s = latency_from_samples({1.0, 2.0, 3.0, 4.0}, 10, 4);
  CHECK(s.total_mean_s == 2.5);
  CHECK(s.total_std_s == doctest::Approx(std::sqrt(5.0 / 3.0)).epsilon(1e-15));
  CHECK(s.repetitions == 4);
  CHECK(s.windows == 10);
  CHECK(s.batch_size == 4);
  CHECK(s.batches == 3);  // ceil(10/4)
  CHECK(s.batch_mean_s == 2.5 / 3.0);
  CHECK(s.window_mean_s == 0.25);
  CHECK(s.window_std_s == s.total_std_s / 10.0);
}

TEST_CASE("latency: a single repetition has zero spread") {
  const LatencyStats s = latency_from_samples({0.125}, 4, 16);
  CHECK(s.total_mean_s == 0.125);
  CHECK(s.total_std_s == 0.0);
  CHECK(s.batches == 1);
}

TEST_CASE("latency: input validation") {
  CHECK_THROWS_AS(latency_from_samples({}, 4, 16), InvalidArgumentError);
  CHECK_THROWS_AS(latency_from_samples({1.0}, 0, 16), InvalidArgumentError);
  CHECK_THROWS_AS(latency_from_samples({1.0}, 4, 0), InvalidArgumentError);
  CHECK_THROWS_AS(latency_from_samples({-1.0}, 4, 16), InvalidArgumentError);
  CHECK_THROWS_AS(latency_from_samples({std::numeric_limits<double>::quiet_NaN()}, 4, 16),
                  InvalidArgumentError);
}

TEST_CASE("benchmark_run: warm-up plus one call per repetition") {
  std::size_t calls = 0;
  const LatencyStats s = benchmark_run([&] { ++calls; }, 5, 20, 16);
  CHECK(calls == 6);  // 1 warm-up + 5 timed
  CHECK(s.repetitions == 5);
  CHECK(s.total_mean_s >= 0.0);
  CHECK(std::isfinite(s.total_std_s));
  CHECK_THROWS_AS(benchmark_run([] {}, 0, 20, 16), InvalidArgumentError);
  CHECK_THROWS_AS(benchmark_run([] {}, 5, 0, 16), InvalidArgumentError);
}

TEST_CASE("benchmark_inference: scores the selected windows in batches") {
  const WindowSet windows = small_window_set(80, 8, 99);
  Model model = Model::lstm_ae(8);
  model.init_params(7);
  std::vector<std::size_t> indices;
  for (std::size_t i = 0; i < 40; ++i) indices.push_back(i);

  const LatencyStats s = benchmark_inference(model, windows, indices, 3);
  CHECK(s.repetitions == 3);
  CHECK(s.windows == 40);
  CHECK(s.batch_size == 16);
  CHECK(s.batches == 3);
  CHECK(s.total_mean_s > 0.0);
  CHECK(s.window_mean_s == s.total_mean_s / 40.0);
  CHECK(s.batch_mean_s == s.total_mean_s / 3.0);

  CHECK_THROWS_AS(benchmark_inference(model, windows, {}, 3), InvalidArgumentError);
  CHECK_THROWS_AS(benchmark_inference(model, windows, indices, 0), InvalidArgumentError);
}

TEST_CASE("benchmark_inference: two identical runs agree within the noise band") {
  const WindowSet windows = small_window_set(200, 8, 5);
  Model model = Model::lstm_ae(8);
  model.init_params(3);
  std::vector<std::size_t> indices;
  for (std::size_t i = 0; i < windows.count(); ++i) indices.push_back(i);

  const LatencyStats a = benchmark_inference(model, windows, indices, 6);
  const LatencyStats b = benchmark_inference(model, windows, indices, 6);
  // Stability smoke check: identical work should time alike.  Allow three
  // combined stds plus a relative slack so scheduler noise cannot flake it.
  const double band = 3.0 * (a.total_std_s + b.total_std_s) +
                      0.25 * std::max(a.total_mean_s, b.total_mean_s);
  CHECK(std::abs(a.total_mean_s - b.total_mean_s) <= band);
}

// ===========================================================================
// Report emission
// ===========================================================================

TEST_CASE("report: JSON round trip is bitwise lossless") {
  TempDir tmp;
  const EvalReport original = sample_report(1);
  const auto path = tmp.file("report.json");
  save_report_json(original, path);
  const EvalReport loaded = load_report_json(path);

  check_reports_equal(original, loaded);
  CHECK(loaded.latency_batch_mean_s == original.latency_batch_mean_s);
  CHECK(loaded.latency_batch_std_s == original.latency_batch_std_s);
  REQUIRE(loaded.sweep.size() == original.sweep.size());
  for (std::size_t i = 0; i < loaded.sweep.size(); ++i) {
    CHECK(loaded.sweep[i].alpha == original.sweep[i].alpha);
    CHECK(loaded.sweep[i].beta == original.sweep[i].beta);
    CHECK(loaded.sweep[i].cm == original.sweep[i].cm);
    CHECK(loaded.sweep[i].precision == original.sweep[i].precision);
    CHECK(loaded.sweep[i].recall == original.sweep[i].recall);
    CHECK(loaded.sweep[i].f1 == original.sweep[i].f1);
  }
}

TEST_CASE("report: JSON loader rejects damaged input") {
  TempDir tmp;
  const auto garbled = tmp.file("garbled.json");
  write_file_bytes(garbled, {'n', 'o', 't', ' ', 'j', 's', 'o', 'n'});
  CHECK_THROWS_AS(load_report_json(garbled), FormatError);

  const auto wrong = tmp.file("wrong.json");
  {
    std::ofstream out(wrong);
    out << "{\"schema\": \"something-else\", \"version\": 1}\n";
  }
  CHECK_THROWS_AS(load_report_json(wrong), FormatError);

  const auto missing = tmp.file("missing.json");
  {
    std::ofstream out(missing);
    out << "{\"schema\": \"avtpids-eval-report\", \"version\": 1, \"dataset\": \"d\"}\n";
  }
  CHECK_THROWS_AS(load_report_json(missing), FormatError);

  CHECK_THROWS_AS(load_report_json(tmp.file("absent.json")), IoError);
}

TEST_CASE("report: CSV header matches the documented schema exactly") {
  CHECK(report_csv_header() ==
        "dataset,detector,w,beta,precision,recall,f1,tp,fp,tn,fn,"
        "latency_mean_s,latency_std_s,params,model_bytes");
}

TEST_CASE("report: CSV round trip is bitwise lossless") {
  TempDir tmp;
  std::vector<EvalReport> reports;
  for (int i = 0; i < 3; ++i) reports.push_back(sample_report(i));
  // Exercise awkward values: negative beta, tiny latencies, zero metrics.
  reports[1].beta = -3.0621e-17;
  reports[1].latency_std_s = 4.9406564584124654e-300;
  reports[2].precision = 0.0;
  reports[2].recall = 0.0;
  reports[2].f1 = 0.0;

  const auto path = tmp.file("summary.csv");
  save_reports_csv(reports, path);
  const std::vector<EvalReport> loaded = load_reports_csv(path);

  REQUIRE(loaded.size() == reports.size());
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    check_reports_equal(reports[i], loaded[i]);
  }
}

TEST_CASE("report: full-run CSV has one row per detector and window length") {
  TempDir tmp;
  const std::vector<std::string> detectors{"cae", "lstm_ae", "ocsvm", "lof", "iforest"};
  const std::vector<std::size_t> widths{8, 16, 24, 32, 40};
  std::vector<EvalReport> reports;
  for (const auto& det : detectors) {
    for (std::size_t w : widths) {
      EvalReport r = sample_report(static_cast<int>(reports.size()));
      r.detector = det;
      r.w = w;
      r.sweep.clear();
      reports.push_back(r);
    }
  }
  const auto path = tmp.file("full.csv");
  save_reports_csv(reports, path);

  CHECK(load_reports_csv(path).size() == 25);
  std::ifstream in(path);
  std::string line;
  std::size_t lines = 0;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == 26);  // header + 5 detectors x 5 window lengths
}

TEST_CASE("report: F1 column re-derivable from precision and recall") {
  TempDir tmp;
  std::vector<EvalReport> reports;
  for (int i = 0; i < 8; ++i) {
    EvalReport r = sample_report(i);
    r.cm = ConfusionMatrix{static_cast<std::uint64_t>(13 * i + 1),
                           static_cast<std::uint64_t>(7 * i), 100,
                           static_cast<std::uint64_t>(5 * i)};
    r.precision = precision(r.cm);
    r.recall = recall(r.cm);
    r.f1 = f1(r.cm);
    reports.push_back(r);
  }
  const auto path = tmp.file("derive.csv");
  save_reports_csv(reports, path);
  for (const EvalReport& r : load_reports_csv(path)) {
    CHECK(std::abs(r.f1 - f1_from(r.precision, r.recall)) <= 1e-9);
  }
}

TEST_CASE("report: ids with CSV metacharacters are rejected") {
  TempDir tmp;
  EvalReport r = sample_report(0);
  r.dataset = "bad,name";
  CHECK_THROWS_AS(save_reports_csv({r}, tmp.file("x.csv")), InvalidArgumentError);
  r.dataset = "ok";
  r.detector = "two\nlines";
  CHECK_THROWS_AS(save_reports_csv({r}, tmp.file("x.csv")), InvalidArgumentError);
}

TEST_CASE("report: CSV loader rejects malformed files") {
  TempDir tmp;
  const auto bad_header = tmp.file("bad_header.csv");
  {
    std::ofstream out(bad_header);
    out << "dataset,detector\nfoo,bar\n";
  }
  CHECK_THROWS_AS(load_reports_csv(bad_header), FormatError);

  const auto short_row = tmp.file("short_row.csv");
  {
    std::ofstream out(short_row);
    out << report_csv_header() << "\n"
        << "d,cae,16,0.1,1,1\n";
  }
  CHECK_THROWS_AS(load_reports_csv(short_row), FormatError);

  const auto bad_number = tmp.file("bad_number.csv");
  {
    std::ofstream out(bad_number);
    out << report_csv_header() << "\n"
        << "d,cae,16,xyz,1,1,1,1,0,1,0,0.1,0.01,10,100\n";
  }
  CHECK_THROWS_AS(load_reports_csv(bad_number), FormatError);

  CHECK_THROWS_AS(load_reports_csv(tmp.file("absent.csv")), IoError);
}

TEST_CASE("report: emit_report dispatches on format") {
  TempDir tmp;
  const EvalReport r = sample_report(4);
  emit_report(r, "json", tmp.file("r.json"));
  emit_report(r, "csv", tmp.file("r.csv"));
  check_reports_equal(r, load_report_json(tmp.file("r.json")));
  const auto rows = load_reports_csv(tmp.file("r.csv"));
  REQUIRE(rows.size() == 1);
  check_reports_equal(r, rows[0]);
  CHECK_THROWS_AS(emit_report(r, "xml", tmp.file("r.xml")), InvalidArgumentError);
}

TEST_CASE("report: non-finite fields and unwritable paths are rejected") {
  TempDir tmp;
  EvalReport r = sample_report(0);
  r.f1 = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(save_report_json(r, tmp.file("nan.json")), InvalidArgumentError);
  CHECK_THROWS_AS(save_reports_csv({r}, tmp.file("nan.csv")), InvalidArgumentError);

  const EvalReport ok = sample_report(0);
  CHECK_THROWS_AS(save_report_json(ok, tmp.path()), IoError);  // path is a directory
  CHECK_THROWS_AS(save_reports_csv({ok}, tmp.path()), IoError);
}
