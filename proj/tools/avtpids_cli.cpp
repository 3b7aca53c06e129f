// avtpids — command-line surface over the AVTP intrusion-detection library.
//
// Subcommands compose through files: synth writes captures, windows builds
// labeled window caches, train fits autoencoders, calibrate sweeps decision
// thresholds, evaluate measures detection quality, bench times inference,
// and report merges per-run reports into one CSV table.
//
// Exit codes: 0 success, 64 usage error, 66 unreadable/invalid input,
// 70 runtime failure.

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "avtpids/calibration.hpp"
#include "avtpids/detectors.hpp"
#include "avtpids/errors.hpp"
#include "avtpids/metrics.hpp"
#include "avtpids/models.hpp"
#include "avtpids/pcap.hpp"
#include "avtpids/report.hpp"
#include "avtpids/synth.hpp"
#include "avtpids/types.hpp"
#include "avtpids/windows.hpp"

namespace fs = std::filesystem;
using namespace avtpids;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 64;    // bad flags/subcommand (EX_USAGE)
constexpr int kExitInput = 66;    // missing or malformed input file (EX_NOINPUT)
constexpr int kExitRuntime = 70;  // failure while doing the work (EX_SOFTWARE)

// Output paths respect AVTPIDS_OUT_DIR: relative output paths are placed
// under it when the variable is set.  Input paths are used as given.
fs::path out_path(const std::string& given) {
  fs::path p(given);
  if (p.is_relative()) {
    if (const char* dir = std::getenv("AVTPIDS_OUT_DIR"); dir != nullptr && *dir != '\0') {
      return fs::path(dir) / p;
    }
  }
  return p;
}

std::vector<std::size_t> iota_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  return idx;
}

// Seeded uniform subsample of [0, n), ascending, via partial Fisher-Yates.
std::vector<std::size_t> subsample_indices(std::size_t n, std::size_t cap,
                                           std::uint64_t seed) {
  if (cap == 0 || n <= cap) return iota_indices(n);
  std::vector<std::size_t> pool = iota_indices(n);
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < cap; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng() % (n - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(cap);
  std::sort(pool.begin(), pool.end());
  return pool;
}

WindowSet windows_from_pcap(const std::string& pcap, std::size_t w,
                            const std::string& replay_path) {
  const IngestResult in = ingest(pcap);
  WindowSet set = build_windows(in.packets, w);
  if (!replay_path.empty()) {
    label_windows(set, ReplaySet::load(replay_path));
  }
  return set;
}

// Resolves the "--windows cache | --pcap capture [--replay-set r]" choice.
WindowSet load_input_windows(const std::string& cache, const std::string& pcap,
                             std::size_t w, const std::string& replay_path) {
  if (!cache.empty()) {
    WindowSet set = load_window_cache(cache);
    if (w != 0 && set.w != w) {
      throw InvalidArgumentError("window cache has w=" + std::to_string(set.w) +
                                 " but w=" + std::to_string(w) + " was requested");
    }
    return set;
  }
  return windows_from_pcap(pcap, w, replay_path);
}

std::size_t count_positives(const std::vector<std::uint8_t>& labels) {
  std::size_t p = 0;
  for (std::uint8_t l : labels) p += (l != 0) ? 1 : 0;
  return p;
}

std::uint64_t file_bytes(const fs::path& p) {
  std::error_code ec;
  const auto n = fs::file_size(p, ec);
  return ec ? 0 : static_cast<std::uint64_t>(n);
}

void print_sweep_table(const ThresholdSweep& sweep) {
  std::cout << "  alpha     beta          precision  recall     f1\n";
  for (std::size_t i = 0; i < sweep.candidates.size(); ++i) {
    const SweepCandidate& c = sweep.candidates[i];
    std::cout << (i == sweep.best_index ? "* " : "  ") << std::left << std::setw(9)
              << c.alpha << std::setw(14) << std::setprecision(8) << c.beta
              << std::setw(11) << std::setprecision(4) << c.precision << std::setw(11)
              << c.recall << c.f1 << std::setprecision(6) << '\n';
  }
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthOpts {
  std::uint64_t seed = 1;
  std::size_t frames = 20000;
  std::size_t start_index = 0;
  std::size_t frame_len = 438;
  std::uint64_t period_ns = 125000;
  std::string out;
  std::size_t inject = 0;        // replay segment length; 0 = benign capture
  double inject_fraction = 0.10;
  std::string plan_in;           // optional explicit attack plan
  std::string save_config;
};

int run_synth(const SynthOpts& o) {
  StreamConfig cfg;
  cfg.seed = o.seed;
  cfg.frame_count = o.frames;
  cfg.start_index = o.start_index;
  cfg.frame_len = o.frame_len;
  cfg.period_ns = o.period_ns;

  const std::vector<RawFrame> stream = gen_stream(cfg);
  const fs::path out = out_path(o.out);

  if (o.inject > 0 || !o.plan_in.empty()) {
    const AttackPlan plan = o.plan_in.empty()
                                ? make_attack_plan(cfg, o.inject_fraction, o.inject)
                                : load_attack_plan(o.plan_in);
    const InjectResult res = inject_replay(stream, plan);
    write_pcap(res.frames, out);
    const fs::path truth = out.string() + ".truth";
    const fs::path replay = out.string() + ".replay";
    const fs::path plan_out = out.string() + ".plan";
    save_ground_truth(res.injected, truth);
    res.replay.save(replay);
    save_attack_plan(plan, plan_out);

    std::size_t injected = 0;
    for (std::uint8_t f : res.injected) injected += f;
    std::cout << "wrote " << res.frames.size() << " frames to " << out.string() << "\n"
              << "injected " << injected << " replayed frames (|R| = " << res.replay.size()
              << ", segment " << plan.segment_len << " @ " << plan.segment_start << ", "
              << plan.positions.size() << " events)\n"
              << "ground truth: " << truth.string() << "\n"
              << "replay set:   " << replay.string() << "\n"
              << "attack plan:  " << plan_out.string() << "\n";
  } else {
    write_pcap(stream, out);
    std::cout << "wrote " << stream.size() << " frames to " << out.string() << "\n";
  }

  if (!o.save_config.empty()) {
    const fs::path cfg_out = out_path(o.save_config);
    save_stream_config(cfg, cfg_out);
    std::cout << "stream config: " << cfg_out.string() << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// ingest
// ---------------------------------------------------------------------------

struct IngestOpts {
  std::string pcap;
  std::string json_out;
};

int run_ingest(const IngestOpts& o) {
  const IngestResult res = ingest(o.pcap);
  std::cout << "capture:         " << o.pcap << "\n"
            << "frames:          " << res.stats.total_frames << "\n"
            << "avtp:            " << res.stats.avtp_frames << "\n"
            << "non_avtp:        " << res.stats.non_avtp_frames << "\n"
            << "truncated:       " << res.stats.truncated_frames << "\n"
            << "truncated_tail:  " << (res.stats.truncated_tail ? "true" : "false") << "\n";
  if (!o.json_out.empty()) {
    const nlohmann::json doc = {
        {"capture", o.pcap},
        {"total_frames", res.stats.total_frames},
        {"avtp_frames", res.stats.avtp_frames},
        {"non_avtp_frames", res.stats.non_avtp_frames},
        {"truncated_frames", res.stats.truncated_frames},
        {"truncated_tail", res.stats.truncated_tail},
    };
    const fs::path out = out_path(o.json_out);
    std::ofstream f(out);
    if (!f) throw IoError("cannot open " + out.string() + " for writing");
    f << doc.dump(2) << '\n';
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// windows
// ---------------------------------------------------------------------------

struct WindowsOpts {
  std::string pcap;
  std::size_t w = 16;
  std::string replay;
  std::string out;
};

int run_windows(const WindowsOpts& o) {
  const WindowSet set = windows_from_pcap(o.pcap, o.w, o.replay);
  const fs::path out = out_path(o.out);
  save_window_cache(set, out);
  std::cout << "windows: " << set.count() << " (w=" << set.w << ")\n"
            << "positives: " << count_positives(set.labels) << "\n"
            << "cache: " << out.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainOpts {
  std::string model = "cae";
  std::size_t w = 16;
  std::string pcap;
  std::string windows;
  std::string out;
  std::string history;
  std::size_t epochs = 200;
  std::size_t patience = 10;
  std::size_t batch = 16;
  double lr = 1e-4;
  std::uint64_t seed = 1;
  double train_fraction = 0.9;
  std::size_t max_windows = 0;
  bool verbose = false;
};

ModelKind parse_kind(const std::string& name) {
  if (name == "lstmae") return ModelKind::kLstmAe;  // CLI spelling
  return model_kind_from_string(name);
}

int run_train(const TrainOpts& o) {
  const WindowSet set = load_input_windows(o.windows, o.pcap, o.w, "");
  if (set.count() == 0) throw InvalidArgumentError("no windows to train on");

  std::size_t usable = set.count();
  if (o.max_windows > 0 && o.max_windows < usable) usable = o.max_windows;
  const auto [train_idx, val_idx] = split_train_val(usable, o.train_fraction, o.seed);

  const ModelKind kind = parse_kind(o.model);
  Model model = kind == ModelKind::kCae ? Model::cae(set.w) : Model::lstm_ae(set.w);
  model.init_params(o.seed);

  std::cout << "model: " << model.name() << "  w: " << set.w << "\n"
            << "parameters: " << model.param_count() << "\n"
            << "training windows: " << train_idx.size()
            << "  validation windows: " << val_idx.size() << "\n";

  TrainConfig cfg;
  cfg.lr = o.lr;
  cfg.batch_size = o.batch;
  cfg.max_epochs = o.epochs;
  cfg.patience = o.patience;
  cfg.seed = o.seed;
  cfg.verbose = o.verbose;
  const TrainHistory history = train_model(model, set, train_idx, val_idx, cfg);

  const fs::path out = out_path(o.out);
  save_model(model, out);
  std::cout << "epochs run: " << history.epochs.size()
            << (history.early_stopped ? " (early stop)" : "") << "\n"
            << "best epoch: " << history.best_epoch << "  val loss: " << std::setprecision(10)
            << history.best_val_loss << "\n"
            << "error stats: mu=" << model.error_mean() << " sigma=" << model.error_std()
            << std::setprecision(6) << "\n"
            << "checkpoint: " << out.string() << " (" << file_bytes(out) << " bytes)\n";

  if (!o.history.empty()) {
    const fs::path hist = out_path(o.history);
    save_history(history, hist);
    std::cout << "history: " << hist.string() << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// calibrate
// ---------------------------------------------------------------------------

struct CalibrateOpts {
  std::string model;
  std::string pcap;
  std::string windows;
  std::string replay;
  std::string report;
  std::string dataset = "validation";
  std::size_t eval_batch = 64;
};

int run_calibrate(const CalibrateOpts& o) {
  Model model = load_model(o.model);
  if (!model.has_error_stats()) {
    throw StateError("checkpoint lacks training error statistics; re-train first");
  }
  const WindowSet set =
      load_input_windows(o.windows, o.pcap, model.window_length(), o.replay);
  const std::vector<std::size_t> idx = iota_indices(set.count());
  const std::vector<double> errors = reconstruction_errors(model, set, idx, o.eval_batch);
  const ErrorStats stats{model.error_mean(), model.error_std()};
  const ThresholdSweep sweep = sweep_and_select(stats, errors, set.labels);

  std::cout << "model: " << model.name() << "  w: " << model.window_length() << "\n"
            << "error stats: mu=" << std::setprecision(8) << stats.mu
            << " sigma=" << stats.sigma << std::setprecision(6) << "\n";
  print_sweep_table(sweep);
  const SweepCandidate& best = sweep.best();
  std::cout << "selected: alpha=" << best.alpha << " beta=" << std::setprecision(8)
            << best.beta << std::setprecision(6) << " f1=" << best.f1 << "\n";

  if (!o.report.empty()) {
    EvalReport rep;
    rep.dataset = o.dataset;
    rep.detector = model.name();
    rep.w = model.window_length();
    rep.beta = best.beta;
    rep.precision = best.precision;
    rep.recall = best.recall;
    rep.f1 = best.f1;
    rep.cm = best.cm;
    rep.params = model.param_count();
    rep.model_bytes = file_bytes(o.model);
    rep.sweep = sweep.candidates;
    const fs::path out = out_path(o.report);
    save_report_json(rep, out);
    std::cout << "report: " << out.string() << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

struct EvaluateOpts {
  std::string model;     // autoencoder checkpoint ...
  std::string detector;  // ... or classical detector kind
  std::string pcap;
  std::string windows;
  std::string replay;
  std::string train_pcap;
  std::string train_windows;
  std::size_t w = 0;  // required for classical detectors
  double alpha = 0.5;
  bool sweep = false;
  std::string report_json;
  std::string report_csv;
  std::string dataset;
  std::size_t reps = 3;
  std::size_t batch = 16;
  std::size_t eval_batch = 64;
  std::uint64_t seed = 1;
  // Classical hyperparameters.
  double nu = 0.05;
  double gamma = 0.0;  // 0 = 1/(d*var) heuristic
  std::size_t k = 20;
  std::size_t trees = 100;
  std::size_t psi = 256;
  std::size_t fit_cap = static_cast<std::size_t>(-1);  // -1 = per-detector default
  std::string save_model_path;
};

std::string dataset_name(const EvaluateOpts& o) {
  if (!o.dataset.empty()) return o.dataset;
  if (!o.pcap.empty()) return fs::path(o.pcap).stem().string();
  return fs::path(o.windows).stem().string();
}

void finish_report(const EvaluateOpts& o, EvalReport& rep) {
  std::cout << "dataset: " << rep.dataset << "  detector: " << rep.detector
            << "  w: " << rep.w << "\n"
            << "beta: " << std::setprecision(8) << rep.beta << std::setprecision(6) << "\n"
            << "precision: " << rep.precision << "  recall: " << rep.recall
            << "  f1: " << rep.f1 << "\n"
            << "confusion: tp=" << rep.cm.tp << " fp=" << rep.cm.fp << " tn=" << rep.cm.tn
            << " fn=" << rep.cm.fn << "\n";
  if (rep.latency_mean_s > 0.0) {
    std::cout << "latency: " << std::setprecision(4) << rep.latency_mean_s * 1e6
              << " us/window (batch of " << o.batch << ": " << rep.latency_batch_mean_s * 1e3
              << " ms)" << std::setprecision(6) << "\n";
  }
  if (!o.report_json.empty()) {
    const fs::path out = out_path(o.report_json);
    save_report_json(rep, out);
    std::cout << "report: " << out.string() << "\n";
  }
  if (!o.report_csv.empty()) {
    const fs::path out = out_path(o.report_csv);
    save_reports_csv({rep}, out);
    std::cout << "csv: " << out.string() << "\n";
  }
}

int run_evaluate_model(const EvaluateOpts& o) {
  Model model = load_model(o.model);
  if (!model.has_error_stats()) {
    throw StateError("checkpoint lacks training error statistics; re-train first");
  }
  const WindowSet set =
      load_input_windows(o.windows, o.pcap, model.window_length(), o.replay);
  const std::vector<std::size_t> idx = iota_indices(set.count());
  const std::vector<double> errors = reconstruction_errors(model, set, idx, o.eval_batch);
  const ErrorStats stats{model.error_mean(), model.error_std()};

  EvalReport rep;
  rep.dataset = dataset_name(o);
  rep.detector = model.name();
  rep.w = model.window_length();
  if (o.sweep) {
    const ThresholdSweep sweep = sweep_and_select(stats, errors, set.labels);
    rep.beta = sweep.best().beta;
    rep.sweep = sweep.candidates;
  } else {
    rep.beta = stats.mu + o.alpha * stats.sigma;
  }

  std::vector<std::uint8_t> preds(errors.size());
  for (std::size_t i = 0; i < errors.size(); ++i) {
    preds[i] = static_cast<std::uint8_t>(classify(errors[i], rep.beta));
  }
  rep.cm = confusion(preds, set.labels);
  rep.precision = precision(rep.cm);
  rep.recall = recall(rep.cm);
  rep.f1 = f1(rep.cm);

  if (o.reps > 0) {
    const LatencyStats lat = benchmark_inference(model, set, idx, o.reps, o.batch);
    rep.latency_mean_s = lat.window_mean_s;
    rep.latency_std_s = lat.window_std_s;
    rep.latency_batch_mean_s = lat.batch_mean_s;
    rep.latency_batch_std_s = lat.batch_std_s;
  }
  rep.params = model.param_count();
  rep.model_bytes = file_bytes(o.model);
  finish_report(o, rep);
  return kExitOk;
}

int run_evaluate_classical(const EvaluateOpts& o) {
  if (o.train_pcap.empty() && o.train_windows.empty()) {
    throw InvalidArgumentError(
        "classical detectors need benign fit data: --train-pcap or --train-windows");
  }
  if (o.w == 0 && o.windows.empty()) {
    throw InvalidArgumentError("--w is required with --detector and --pcap input");
  }

  WindowSet eval_set = load_input_windows(o.windows, o.pcap, o.w, o.replay);
  const std::size_t w = eval_set.w;
  const WindowSet train_set = load_input_windows(o.train_windows, o.train_pcap, w, "");

  // Fit on normal windows only; a labeled cache may carry positives.
  std::vector<std::size_t> normal;
  for (std::size_t i = 0; i < train_set.count(); ++i) {
    if (train_set.labels.empty() || train_set.labels[i] == 0) normal.push_back(i);
  }
  if (normal.empty()) throw InvalidArgumentError("no normal windows to fit on");

  EvalReport rep;
  rep.dataset = dataset_name(o);
  rep.detector = o.detector;
  rep.w = w;

  const FloatMatrix eval_x = flat_matrix(eval_set, iota_indices(eval_set.count()));
  std::vector<double> scores;
  ScoreDirection direction = ScoreDirection::kHighAnomalous;
  std::function<void()> scoring;  // timed body

  if (o.detector == "ocsvm") {
    direction = ScoreDirection::kLowAnomalous;
    const FloatMatrix train_x = flat_matrix(train_set, normal);
    OcsvmOptions opts;
    opts.subsample_seed = o.seed;
    if (o.fit_cap != static_cast<std::size_t>(-1)) opts.subsample_cap = o.fit_cap;
    const double gamma = o.gamma > 0.0 ? o.gamma : ocsvm_default_gamma(train_x);
    const OcsvmModel m = ocsvm_fit(train_x, o.nu, gamma, opts);
    std::cout << "ocsvm: " << m.coefficients.size() << " support vectors, gamma="
              << std::setprecision(6) << m.gamma << (m.converged ? "" : " (not converged)")
              << "\n";
    scores = ocsvm_scores(m, eval_x);
    scoring = [&eval_x, m]() { ocsvm_scores(m, eval_x); };
    if (!o.save_model_path.empty()) {
      const fs::path out = out_path(o.save_model_path);
      save_ocsvm(m, out);
      rep.model_bytes = file_bytes(out);
    }
  } else if (o.detector == "lof") {
    // LOF keeps every fit row for scoring, so cap the fit set by default to
    // keep distance scans tractable at desk scale.
    const std::size_t cap = o.fit_cap != static_cast<std::size_t>(-1) ? o.fit_cap : 2000;
    std::vector<std::size_t> fit_rows = normal;
    if (cap > 0 && fit_rows.size() > cap) {
      const std::vector<std::size_t> pick = subsample_indices(fit_rows.size(), cap, o.seed);
      std::vector<std::size_t> capped;
      capped.reserve(pick.size());
      for (std::size_t p : pick) capped.push_back(fit_rows[p]);
      fit_rows = std::move(capped);
    }
    const FloatMatrix train_x = flat_matrix(train_set, fit_rows);
    const LofModel m = lof_fit(train_x, o.k);
    std::cout << "lof: fit on " << m.size() << " windows, k=" << m.k << "\n";
    scores = lof_scores(m, eval_x);
    scoring = [&eval_x, m]() { lof_scores(m, eval_x); };
    if (!o.save_model_path.empty()) {
      const fs::path out = out_path(o.save_model_path);
      save_lof(m, out);
      rep.model_bytes = file_bytes(out);
    }
  } else {  // iforest
    const FloatMatrix train_x = flat_matrix(train_set, normal);
    const std::size_t psi = std::min(o.psi, train_x.rows);
    const IsoForest m = iforest_fit(train_x, o.trees, psi, o.seed);
    std::cout << "iforest: " << m.trees.size() << " trees, psi=" << m.psi << "\n";
    scores = iforest_scores(m, eval_x);
    scoring = [&eval_x, m]() { iforest_scores(m, eval_x); };
    if (!o.save_model_path.empty()) {
      const fs::path out = out_path(o.save_model_path);
      save_iforest(m, out);
      rep.model_bytes = file_bytes(out);
    }
  }

  const ThresholdResult thr = classical_threshold(scores, eval_set.labels, direction);
  const std::vector<std::uint8_t> preds = apply_threshold(scores, thr.threshold, direction);
  rep.beta = thr.threshold;
  rep.cm = confusion(preds, eval_set.labels);
  rep.precision = precision(rep.cm);
  rep.recall = recall(rep.cm);
  rep.f1 = f1(rep.cm);

  if (o.reps > 0) {
    const LatencyStats lat = benchmark_run(scoring, o.reps, eval_x.rows, o.batch);
    rep.latency_mean_s = lat.window_mean_s;
    rep.latency_std_s = lat.window_std_s;
    rep.latency_batch_mean_s = lat.batch_mean_s;
    rep.latency_batch_std_s = lat.batch_std_s;
  }
  finish_report(o, rep);
  return kExitOk;
}

int run_evaluate(const EvaluateOpts& o) {
  if (!o.model.empty()) return run_evaluate_model(o);
  return run_evaluate_classical(o);
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

struct BenchOpts {
  std::string model;
  std::string pcap;
  std::string windows;
  std::size_t reps = 5;
  std::size_t batch = 16;
  std::size_t max_windows = 0;
  std::string json_out;
};

int run_bench(const BenchOpts& o) {
  Model model = load_model(o.model);
  const WindowSet set = load_input_windows(o.windows, o.pcap, model.window_length(), "");
  std::size_t usable = set.count();
  if (o.max_windows > 0 && o.max_windows < usable) usable = o.max_windows;
  const std::vector<std::size_t> idx = iota_indices(usable);

  const LatencyStats lat = benchmark_inference(model, set, idx, o.reps, o.batch);
  std::cout << "model: " << model.name() << "  w: " << model.window_length()
            << "  windows: " << lat.windows << "  batch: " << lat.batch_size
            << "  repetitions: " << lat.repetitions << "\n"
            << std::setprecision(4) << "per pass:   " << lat.total_mean_s * 1e3 << " ms ± "
            << lat.total_std_s * 1e3 << " ms\n"
            << "per batch:  " << lat.batch_mean_s * 1e3 << " ms ± " << lat.batch_std_s * 1e3
            << " ms\n"
            << "per window: " << lat.window_mean_s * 1e6 << " us ± " << lat.window_std_s * 1e6
            << " us\n"
            << std::setprecision(6);

  if (!o.json_out.empty()) {
    const nlohmann::json doc = {
        {"detector", model.name()},
        {"w", model.window_length()},
        {"windows", lat.windows},
        {"batch_size", lat.batch_size},
        {"batches", lat.batches},
        {"repetitions", lat.repetitions},
        {"total_mean_s", lat.total_mean_s},
        {"total_std_s", lat.total_std_s},
        {"batch_mean_s", lat.batch_mean_s},
        {"batch_std_s", lat.batch_std_s},
        {"window_mean_s", lat.window_mean_s},
        {"window_std_s", lat.window_std_s},
    };
    const fs::path out = out_path(o.json_out);
    std::ofstream f(out);
    if (!f) throw IoError("cannot open " + out.string() + " for writing");
    f << doc.dump(2) << '\n';
    std::cout << "json: " << out.string() << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

struct ReportOpts {
  std::vector<std::string> inputs;
  std::string out;
};

int run_report(const ReportOpts& o) {
  std::vector<EvalReport> rows;
  for (const std::string& in : o.inputs) {
    const fs::path p(in);
    if (p.extension() == ".json") {
      rows.push_back(load_report_json(p));
    } else if (p.extension() == ".csv") {
      for (EvalReport& r : load_reports_csv(p)) rows.push_back(std::move(r));
    } else {
      throw InvalidArgumentError("report inputs must end in .json or .csv: " + in);
    }
  }
  const fs::path out = out_path(o.out);
  save_reports_csv(rows, out);
  std::cout << "merged " << rows.size() << " rows into " << out.string() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AVTP intrusion-detection pipeline"};
  app.require_subcommand(1);
  std::function<int()> action;

  const std::set<std::size_t> valid_w{8, 16, 24, 32, 40};

  // --- synth ---------------------------------------------------------------
  SynthOpts synth_o;
  CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic AVTP capture");
  synth->add_option("--seed", synth_o.seed, "Stream seed")->capture_default_str();
  synth->add_option("--frames", synth_o.frames, "Frames to generate")->capture_default_str();
  synth->add_option("--start-index", synth_o.start_index, "First absolute frame ordinal")
      ->capture_default_str();
  synth->add_option("--frame-len", synth_o.frame_len, "Frame length in octets (>= 58)")
      ->check(CLI::Range(std::size_t{58}, std::size_t{9000}))
      ->capture_default_str();
  synth->add_option("--period-ns", synth_o.period_ns, "Capture timestamp period (ns)")
      ->check(CLI::Range(std::uint64_t{1}, std::uint64_t{1000000000}))
      ->capture_default_str();
  synth->add_option("--out", synth_o.out, "Output pcap path")->required();
  synth->add_option("--inject", synth_o.inject,
                    "Replay segment length; writes .truth/.replay/.plan sidecars");
  synth->add_option("--inject-fraction", synth_o.inject_fraction,
                    "Injected share of the final capture")
      ->check(CLI::Range(1e-6, 0.4999))
      ->capture_default_str();
  synth->add_option("--plan", synth_o.plan_in, "Use this attack plan file instead");
  synth->add_option("--save-config", synth_o.save_config, "Also write the stream config");
  synth->callback([&] { action = [&] { return run_synth(synth_o); }; });

  // --- ingest ----------------------------------------------------------------
  IngestOpts ingest_o;
  CLI::App* ing = app.add_subcommand("ingest", "Parse a capture and report AVTP statistics");
  ing->add_option("--pcap", ingest_o.pcap, "Input capture")->required();
  ing->add_option("--json", ingest_o.json_out, "Write the statistics as JSON");
  ing->callback([&] { action = [&] { return run_ingest(ingest_o); }; });

  // --- windows ---------------------------------------------------------------
  WindowsOpts windows_o;
  CLI::App* win = app.add_subcommand("windows", "Build a labeled sliding-window cache");
  win->add_option("--pcap", windows_o.pcap, "Input capture")->required();
  win->add_option("--w", windows_o.w, "Window length")
      ->check(CLI::IsMember(valid_w))
      ->capture_default_str();
  win->add_option("--replay-set", windows_o.replay, "Replay set for labeling");
  win->add_option("--out", windows_o.out, "Output cache path")->required();
  win->callback([&] { action = [&] { return run_windows(windows_o); }; });

  // --- train -----------------------------------------------------------------
  TrainOpts train_o;
  CLI::App* tr = app.add_subcommand("train", "Train an autoencoder on normal windows");
  tr->add_option("--model", train_o.model, "Architecture: cae or lstmae")
      ->check(CLI::IsMember({"cae", "lstmae", "lstm_ae"}))
      ->capture_default_str();
  tr->add_option("--w", train_o.w, "Window length")
      ->check(CLI::IsMember(valid_w))
      ->capture_default_str();
  auto* tr_in = tr->add_option_group("input", "Training data");
  tr_in->add_option("--pcap", train_o.pcap, "Benign capture");
  tr_in->add_option("--windows", train_o.windows, "Window cache");
  tr_in->require_option(1);
  tr->add_option("--out", train_o.out, "Checkpoint output path")->required();
  tr->add_option("--history", train_o.history, "Write per-epoch losses");
  tr->add_option("--epochs", train_o.epochs, "Epoch cap")->capture_default_str();
  tr->add_option("--patience", train_o.patience, "Early-stopping patience")
      ->capture_default_str();
  tr->add_option("--batch", train_o.batch, "Mini-batch size")->capture_default_str();
  tr->add_option("--lr", train_o.lr, "Adam learning rate")->capture_default_str();
  tr->add_option("--seed", train_o.seed, "Init/shuffle/split seed")->capture_default_str();
  tr->add_option("--train-fraction", train_o.train_fraction, "Train share of the split")
      ->check(CLI::Range(0.01, 0.99))
      ->capture_default_str();
  tr->add_option("--max-windows", train_o.max_windows, "Cap on windows used (0 = all)")
      ->capture_default_str();
  tr->add_flag("--verbose", train_o.verbose, "Per-epoch progress on stderr");
  tr->callback([&] { action = [&] { return run_train(train_o); }; });

  // --- calibrate ---------------------------------------------------------------
  CalibrateOpts cal_o;
  CLI::App* cal = app.add_subcommand("calibrate",
                                     "Sweep decision thresholds on labeled windows");
  cal->add_option("--model", cal_o.model, "Autoencoder checkpoint")->required();
  auto* cal_in = cal->add_option_group("input", "Labeled validation data");
  cal_in->add_option("--pcap", cal_o.pcap, "Capture (use with --replay-set)");
  cal_in->add_option("--windows", cal_o.windows, "Labeled window cache");
  cal_in->require_option(1);
  cal->add_option("--replay-set", cal_o.replay, "Replay set for labeling");
  cal->add_option("--report", cal_o.report, "Write the sweep as a JSON report");
  cal->add_option("--dataset", cal_o.dataset, "Dataset id used in the report")
      ->capture_default_str();
  cal->add_option("--eval-batch", cal_o.eval_batch, "Scoring batch size")
      ->capture_default_str();
  cal->callback([&] { action = [&] { return run_calibrate(cal_o); }; });

  // --- evaluate ----------------------------------------------------------------
  EvaluateOpts eval_o;
  CLI::App* ev = app.add_subcommand("evaluate", "Measure detection quality on a capture");
  auto* ev_det = ev->add_option_group("detector", "What to evaluate");
  ev_det->add_option("--model", eval_o.model, "Autoencoder checkpoint");
  ev_det->add_option("--detector", eval_o.detector, "Classical detector kind")
      ->check(CLI::IsMember({"ocsvm", "lof", "iforest"}));
  ev_det->require_option(1);
  auto* ev_in = ev->add_option_group("input", "Labeled evaluation data");
  ev_in->add_option("--pcap", eval_o.pcap, "Capture (use with --replay-set)");
  ev_in->add_option("--windows", eval_o.windows, "Labeled window cache");
  ev_in->require_option(1);
  ev->add_option("--replay-set", eval_o.replay, "Replay set for labeling");
  ev->add_option("--train-pcap", eval_o.train_pcap, "Benign capture to fit classical models");
  ev->add_option("--train-windows", eval_o.train_windows, "Benign window cache for fitting");
  ev->add_option("--w", eval_o.w, "Window length (classical detectors)")
      ->check(CLI::IsMember(valid_w));
  ev->add_option("--alpha", eval_o.alpha, "Threshold beta = mu + alpha*sigma")
      ->capture_default_str();
  ev->add_flag("--sweep", eval_o.sweep, "Select beta by F1 sweep instead of --alpha");
  ev->add_option("--report", eval_o.report_json, "Write a JSON report");
  ev->add_option("--csv", eval_o.report_csv, "Write a one-row CSV report");
  ev->add_option("--dataset", eval_o.dataset, "Dataset id (default: input stem)");
  ev->add_option("--reps", eval_o.reps, "Timing repetitions (0 = skip timing)")
      ->capture_default_str();
  ev->add_option("--batch", eval_o.batch, "Inference batch size")->capture_default_str();
  ev->add_option("--seed", eval_o.seed, "Seed for fit-time subsampling")
      ->capture_default_str();
  ev->add_option("--nu", eval_o.nu, "One-class SVM nu")->capture_default_str();
  ev->add_option("--gamma", eval_o.gamma, "RBF gamma (0 = 1/(d*var) heuristic)")
      ->capture_default_str();
  ev->add_option("--k", eval_o.k, "LOF neighbour count")->capture_default_str();
  ev->add_option("--trees", eval_o.trees, "Isolation forest tree count")
      ->capture_default_str();
  ev->add_option("--psi", eval_o.psi, "Isolation forest subsample size")
      ->capture_default_str();
  ev->add_option("--fit-cap", eval_o.fit_cap,
                 "Cap on fit windows (default: 10000 ocsvm, 2000 lof)");
  ev->add_option("--save-model", eval_o.save_model_path, "Save the fitted classical model");
  ev->callback([&] { action = [&] { return run_evaluate(eval_o); }; });

  // --- bench -------------------------------------------------------------------
  BenchOpts bench_o;
  CLI::App* be = app.add_subcommand("bench", "Time autoencoder inference");
  be->add_option("--model", bench_o.model, "Autoencoder checkpoint")->required();
  auto* be_in = be->add_option_group("input", "Windows to score");
  be_in->add_option("--pcap", bench_o.pcap, "Capture");
  be_in->add_option("--windows", bench_o.windows, "Window cache");
  be_in->require_option(1);
  be->add_option("--reps", bench_o.reps, "Timing repetitions")->capture_default_str();
  be->add_option("--batch", bench_o.batch, "Inference batch size")->capture_default_str();
  be->add_option("--max-windows", bench_o.max_windows, "Cap on windows scored (0 = all)")
      ->capture_default_str();
  be->add_option("--json", bench_o.json_out, "Write the timing stats as JSON");
  be->callback([&] { action = [&] { return run_bench(bench_o); }; });

  // --- report ------------------------------------------------------------------
  ReportOpts report_o;
  CLI::App* rp = app.add_subcommand("report", "Merge JSON/CSV reports into one CSV");
  rp->add_option("inputs", report_o.inputs, "Report files (.json or .csv)")
      ->required();
  rp->add_option("--out", report_o.out, "Merged CSV path")->required();
  rp->callback([&] { action = [&] { return run_report(report_o); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);  // prints help or the parse error
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    return action ? action() : kExitUsage;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const MalformedFrameError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
