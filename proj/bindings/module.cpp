// Python bindings for the AVTP intrusion-detection library.  Exposes the
// pipeline's main operations with numpy-backed exchange types: capture
// synthesis and ingestion, window building, the two autoencoders with
// training and scoring, threshold calibration, confusion-matrix metrics, and
// the three classical detectors.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>
#include <optional>
#include <string>
#include <vector>

#include "avtpids/calibration.hpp"
#include "avtpids/detectors.hpp"
#include "avtpids/errors.hpp"
#include "avtpids/metrics.hpp"
#include "avtpids/models.hpp"
#include "avtpids/pcap.hpp"
#include "avtpids/synth.hpp"
#include "avtpids/tensor.hpp"
#include "avtpids/types.hpp"
#include "avtpids/windows.hpp"

namespace py = pybind11;
using namespace avtpids;

namespace {

using U8Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;
using F64Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<FeatureVector> features_from_array(const U8Array& arr) {
  if (arr.ndim() != 2 || static_cast<std::size_t>(arr.shape(1)) != kFeatureBytes) {
    throw InvalidArgumentError("feature array must have shape [n, 58]");
  }
  const std::size_t n = static_cast<std::size_t>(arr.shape(0));
  std::vector<FeatureVector> rows(n);
  const std::uint8_t* src = arr.data();
  for (std::size_t i = 0; i < n; ++i) {
    std::memcpy(rows[i].data(), src + i * kFeatureBytes, kFeatureBytes);
  }
  return rows;
}

py::array_t<std::uint8_t> features_to_array(const std::vector<FeatureVector>& rows) {
  py::array_t<std::uint8_t> arr({rows.size(), kFeatureBytes});
  std::uint8_t* dst = arr.mutable_data();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::memcpy(dst + i * kFeatureBytes, rows[i].data(), kFeatureBytes);
  }
  return arr;
}

FloatMatrix matrix_from_array(const F64Array& arr, const char* what) {
  if (arr.ndim() != 2) {
    throw InvalidArgumentError(std::string(what) + " must be a 2-d float array");
  }
  FloatMatrix x{static_cast<std::size_t>(arr.shape(0)),
                static_cast<std::size_t>(arr.shape(1)),
                {}};
  x.data.assign(arr.data(), arr.data() + x.rows * x.cols);
  return x;
}

py::array_t<double> matrix_to_array(const FloatMatrix& x) {
  py::array_t<double> arr({x.rows, x.cols});
  std::memcpy(arr.mutable_data(), x.data.data(), x.data.size() * sizeof(double));
  return arr;
}

py::array_t<double> vector_to_array(const std::vector<double>& v) {
  py::array_t<double> arr(static_cast<py::ssize_t>(v.size()));
  std::memcpy(arr.mutable_data(), v.data(), v.size() * sizeof(double));
  return arr;
}

std::vector<double> vector_from_array(const F64Array& arr, const char* what) {
  if (arr.ndim() != 1) {
    throw InvalidArgumentError(std::string(what) + " must be a 1-d float array");
  }
  return {arr.data(), arr.data() + arr.shape(0)};
}

std::vector<std::uint8_t> labels_from_array(const U8Array& arr, const char* what) {
  if (arr.ndim() != 1) {
    throw InvalidArgumentError(std::string(what) + " must be a 1-d uint8 array");
  }
  return {arr.data(), arr.data() + arr.shape(0)};
}

py::array_t<std::uint8_t> labels_to_array(const std::vector<std::uint8_t>& v) {
  py::array_t<std::uint8_t> arr(static_cast<py::ssize_t>(v.size()));
  std::memcpy(arr.mutable_data(), v.data(), v.size());
  return arr;
}

Tensor batch_from_array(const F64Array& arr, std::size_t w) {
  if (arr.ndim() != 3 || static_cast<std::size_t>(arr.shape(1)) != w ||
      static_cast<std::size_t>(arr.shape(2)) != kFeatureBytes) {
    throw InvalidArgumentError("batch must have shape [B, " + std::to_string(w) + ", 58]");
  }
  Tensor t({static_cast<std::size_t>(arr.shape(0)), w, kFeatureBytes});
  std::memcpy(t.data(), arr.data(), t.size() * sizeof(double));
  return t;
}

py::array_t<double> batch_to_array(const Tensor& t) {
  py::array_t<double> arr({t.dim(0), t.dim(1), t.dim(2)});
  std::memcpy(arr.mutable_data(), t.data(), t.size() * sizeof(double));
  return arr;
}

std::vector<std::size_t> indices_or_all(const std::optional<std::vector<std::size_t>>& idx,
                                        std::size_t count) {
  if (idx.has_value()) return *idx;
  std::vector<std::size_t> all(count);
  for (std::size_t i = 0; i < count; ++i) all[i] = i;
  return all;
}

py::dict stats_to_dict(const CaptureStats& s) {
  py::dict d;
  d["total_frames"] = s.total_frames;
  d["avtp_frames"] = s.avtp_frames;
  d["non_avtp_frames"] = s.non_avtp_frames;
  d["truncated_frames"] = s.truncated_frames;
  d["truncated_tail"] = s.truncated_tail;
  return d;
}

py::dict candidate_to_dict(const SweepCandidate& c) {
  py::dict d;
  d["alpha"] = c.alpha;
  d["beta"] = c.beta;
  d["tp"] = c.cm.tp;
  d["fp"] = c.cm.fp;
  d["tn"] = c.cm.tn;
  d["fn"] = c.cm.fn;
  d["precision"] = c.precision;
  d["recall"] = c.recall;
  d["f1"] = c.f1;
  return d;
}

ScoreDirection direction_from_string(const std::string& s) {
  if (s == "low") return ScoreDirection::kLowAnomalous;
  if (s == "high") return ScoreDirection::kHighAnomalous;
  throw InvalidArgumentError("direction must be 'low' or 'high'");
}

}  // namespace

PYBIND11_MODULE(_avtpids, m) {
  m.doc() = "AVTP intrusion detection: windows, autoencoders, calibration, detectors";
  m.attr("__version__") = kVersion;
  m.attr("FEATURE_BYTES") = kFeatureBytes;
  m.attr("AVTP_ETHERTYPE") = kAvtpEthertype;
  m.attr("WINDOW_LENGTHS") = std::vector<std::size_t>{8, 16, 24, 32, 40};

  py::register_exception<Error>(m, "AvtpError", PyExc_RuntimeError);

  // --- capture synthesis and ingestion ------------------------------------
  m.def(
      "synth_capture",
      [](const std::filesystem::path& path, std::uint64_t seed, std::size_t frames,
         std::size_t inject, double inject_fraction, std::size_t frame_len,
         std::uint64_t period_ns, std::size_t start_index) {
        StreamConfig cfg;
        cfg.seed = seed;
        cfg.frame_count = frames;
        cfg.frame_len = frame_len;
        cfg.period_ns = period_ns;
        cfg.start_index = start_index;
        const std::vector<RawFrame> stream = gen_stream(cfg);
        py::dict out;
        out["path"] = path.string();
        if (inject > 0) {
          const AttackPlan plan = make_attack_plan(cfg, inject_fraction, inject);
          const InjectResult res = inject_replay(stream, plan);
          write_pcap(res.frames, path);
          const std::string truth = path.string() + ".truth";
          const std::string replay = path.string() + ".replay";
          save_ground_truth(res.injected, truth);
          res.replay.save(replay);
          std::size_t injected = 0;
          for (std::uint8_t f : res.injected) injected += f;
          out["frames"] = res.frames.size();
          out["injected"] = injected;
          out["replay_size"] = res.replay.size();
          out["truth_path"] = truth;
          out["replay_path"] = replay;
        } else {
          write_pcap(stream, path);
          out["frames"] = stream.size();
          out["injected"] = std::size_t{0};
        }
        return out;
      },
      py::arg("path"), py::arg("seed") = 1, py::arg("frames") = 20000,
      py::arg("inject") = 0, py::arg("inject_fraction") = 0.10,
      py::arg("frame_len") = 438, py::arg("period_ns") = 125000,
      py::arg("start_index") = 0,
      "Write a synthetic AVTP capture; inject > 0 adds replayed copies of a "
      "segment of that length plus .truth/.replay sidecars.");

  m.def(
      "ingest",
      [](const std::filesystem::path& path) {
        const IngestResult res = ingest(path);
        std::vector<FeatureVector> rows;
        rows.reserve(res.packets.size());
        for (const AvtpPacket& p : res.packets) rows.push_back(p.features);
        return py::make_tuple(features_to_array(rows), stats_to_dict(res.stats));
      },
      py::arg("path"),
      "Parse a capture; returns (features uint8 [n,58], stats dict).");

  // --- windows -------------------------------------------------------------
  py::class_<WindowSet>(m, "WindowSet",
                        "Sliding windows (slide 1) over a packet sequence's "
                        "58-byte feature rows, with per-window labels.")
      .def_static(
          "from_features",
          [](const U8Array& features, std::size_t w) {
            return build_windows(features_from_array(features), w);
          },
          py::arg("features"), py::arg("w"))
      .def_static(
          "from_pcap",
          [](const std::filesystem::path& pcap, std::size_t w,
             const std::optional<std::filesystem::path>& replay) {
            const IngestResult in = ingest(pcap);
            WindowSet set = build_windows(in.packets, w);
            if (replay.has_value()) label_windows(set, ReplaySet::load(*replay));
            return set;
          },
          py::arg("pcap"), py::arg("w"), py::arg("replay") = std::nullopt)
      .def_property_readonly("w", [](const WindowSet& s) { return s.w; })
      .def_property_readonly("count", [](const WindowSet& s) { return s.count(); })
      .def_property_readonly("labels",
                             [](const WindowSet& s) { return labels_to_array(s.labels); })
      .def_property_readonly(
          "features", [](const WindowSet& s) { return features_to_array(s.features); })
      .def(
          "label_with",
          [](WindowSet& s, const U8Array& replay_rows) {
            ReplaySet r;
            for (const FeatureVector& fv : features_from_array(replay_rows)) r.insert(fv);
            label_windows(s, r);
          },
          py::arg("replay_rows"),
          "Label windows against replayed 58-byte rows (exact match).")
      .def(
          "flat",
          [](const WindowSet& s, const std::optional<std::vector<std::size_t>>& idx) {
            return matrix_to_array(flat_matrix(s, indices_or_all(idx, s.count())));
          },
          py::arg("indices") = std::nullopt,
          "Row-major [n, w*58] window images scaled into [0,1].")
      .def("save", [](const WindowSet& s,
                      const std::filesystem::path& p) { save_window_cache(s, p); })
      .def_static("load",
                  [](const std::filesystem::path& p) { return load_window_cache(p); })
      .def("__len__", [](const WindowSet& s) { return s.count(); });

  m.def("split_train_val", &split_train_val, py::arg("count"), py::arg("fraction"),
        py::arg("seed"),
        "Deterministic disjoint split of [0, count) into (train, val) index lists.");

  // --- autoencoders ----------------------------------------------------------
  py::class_<Model>(m, "Model", "Convolutional or LSTM autoencoder over window images.")
      .def_static("cae", &Model::cae, py::arg("w"))
      .def_static("lstm_ae", &Model::lstm_ae, py::arg("w"))
      .def_static("load",
                  [](const std::filesystem::path& p) { return load_model(p); },
                  py::arg("path"))
      .def_property_readonly("kind", [](const Model& m_) { return m_.name(); })
      .def_property_readonly("w", &Model::window_length)
      .def_property_readonly("param_count", [](Model& m_) { return m_.param_count(); })
      .def_property_readonly("error_mu",
                             [](const Model& m_) {
                               return m_.has_error_stats()
                                          ? std::optional<double>(m_.error_mean())
                                          : std::nullopt;
                             })
      .def_property_readonly("error_sigma",
                             [](const Model& m_) {
                               return m_.has_error_stats()
                                          ? std::optional<double>(m_.error_std())
                                          : std::nullopt;
                             })
      .def("init_params", &Model::init_params, py::arg("seed"))
      .def(
          "forward",
          [](Model& m_, const F64Array& batch) {
            const Tensor x = batch_from_array(batch, m_.window_length());
            Tensor y;
            {
              py::gil_scoped_release release;
              y = m_.forward_batch(x, false);
            }
            return batch_to_array(y);
          },
          py::arg("batch"), "Reconstruct a [B, w, 58] batch.")
      .def(
          "train",
          [](Model& m_, const WindowSet& windows, double train_fraction,
             std::size_t epochs, std::size_t patience, std::size_t batch, double lr,
             std::uint64_t seed, std::size_t max_windows, bool verbose) {
            std::size_t usable = windows.count();
            if (max_windows > 0 && max_windows < usable) usable = max_windows;
            const auto [train_idx, val_idx] = split_train_val(usable, train_fraction, seed);
            TrainConfig cfg;
            cfg.lr = lr;
            cfg.batch_size = batch;
            cfg.max_epochs = epochs;
            cfg.patience = patience;
            cfg.seed = seed;
            cfg.verbose = verbose;
            TrainHistory hist;
            {
              py::gil_scoped_release release;
              hist = train_model(m_, windows, train_idx, val_idx, cfg);
            }
            py::list epochs_out;
            for (const EpochStats& e : hist.epochs) {
              py::dict d;
              d["epoch"] = e.epoch;
              d["train_loss"] = e.train_loss;
              d["val_loss"] = e.val_loss;
              epochs_out.append(d);
            }
            py::dict out;
            out["epochs"] = epochs_out;
            out["best_epoch"] = hist.best_epoch;
            out["best_val_loss"] = hist.best_val_loss;
            out["early_stopped"] = hist.early_stopped;
            return out;
          },
          py::arg("windows"), py::arg("train_fraction") = 0.9, py::arg("epochs") = 200,
          py::arg("patience") = 10, py::arg("batch") = 16, py::arg("lr") = 1e-4,
          py::arg("seed") = 1, py::arg("max_windows") = 0, py::arg("verbose") = false,
          "Adam training with early stopping on normal windows; returns the history.")
      .def(
          "errors",
          [](Model& m_, const WindowSet& windows,
             const std::optional<std::vector<std::size_t>>& idx, std::size_t batch) {
            const auto indices = indices_or_all(idx, windows.count());
            std::vector<double> errs;
            {
              py::gil_scoped_release release;
              errs = reconstruction_errors(m_, windows, indices, batch);
            }
            return vector_to_array(errs);
          },
          py::arg("windows"), py::arg("indices") = std::nullopt, py::arg("batch") = 64,
          "Per-window mean squared reconstruction error.")
      .def("save",
           [](Model& m_, const std::filesystem::path& p) { save_model(m_, p); },
           py::arg("path"));

  // --- calibration -------------------------------------------------------------
  m.def(
      "error_stats",
      [](const F64Array& errors) {
        const ErrorStats s = error_stats(vector_from_array(errors, "errors"));
        return py::make_tuple(s.mu, s.sigma);
      },
      py::arg("errors"), "Population (mu, sigma) of reconstruction errors.");

  m.def("classify", &classify, py::arg("score"), py::arg("beta"),
        "1 (abnormal) iff score > beta; ties are normal.");

  m.def(
      "sweep_and_select",
      [](double mu, double sigma, const F64Array& scores, const U8Array& labels) {
        const ThresholdSweep sweep =
            sweep_and_select(ErrorStats{mu, sigma}, vector_from_array(scores, "scores"),
                             labels_from_array(labels, "labels"));
        py::list cands;
        for (const SweepCandidate& c : sweep.candidates) cands.append(candidate_to_dict(c));
        py::dict out;
        out["candidates"] = cands;
        out["best_index"] = sweep.best_index;
        out["best"] = candidate_to_dict(sweep.best());
        return out;
      },
      py::arg("mu"), py::arg("sigma"), py::arg("scores"), py::arg("labels"),
      "Evaluate the nine beta = mu + alpha*sigma candidates; F1 argmax wins, "
      "ties to the smaller beta.");

  // --- metrics -------------------------------------------------------------------
  m.def(
      "confusion",
      [](const U8Array& preds, const U8Array& labels) {
        const ConfusionMatrix cm = confusion(labels_from_array(preds, "predictions"),
                                             labels_from_array(labels, "labels"));
        py::dict d;
        d["tp"] = cm.tp;
        d["fp"] = cm.fp;
        d["tn"] = cm.tn;
        d["fn"] = cm.fn;
        return d;
      },
      py::arg("predictions"), py::arg("labels"));

  m.def(
      "precision_recall_f1",
      [](std::uint64_t tp, std::uint64_t fp, std::uint64_t tn, std::uint64_t fn) {
        const ConfusionMatrix cm{tp, fp, tn, fn};
        return py::make_tuple(precision(cm), recall(cm), f1(cm));
      },
      py::arg("tp"), py::arg("fp"), py::arg("tn"), py::arg("fn"),
      "Precision, recall, F1 with zero denominators defined as 0.");

  m.def("f1_from", &f1_from, py::arg("precision"), py::arg("recall"));

  // --- classical detectors ----------------------------------------------------------
  py::class_<OcsvmModel>(m, "Ocsvm",
                         "One-class SVM (RBF, nu-parameterised dual); "
                         "scores below the threshold are anomalous.")
      .def_static(
          "fit",
          [](const F64Array& x, double nu, double gamma, double tolerance,
             std::size_t subsample_cap, std::uint64_t seed) {
            const FloatMatrix mat = matrix_from_array(x, "training matrix");
            OcsvmOptions opts;
            opts.tolerance = tolerance;
            opts.subsample_cap = subsample_cap;
            opts.subsample_seed = seed;
            const double g = gamma > 0.0 ? gamma : ocsvm_default_gamma(mat);
            py::gil_scoped_release release;
            return ocsvm_fit(mat, nu, g, opts);
          },
          py::arg("x"), py::arg("nu") = 0.05, py::arg("gamma") = 0.0,
          py::arg("tolerance") = 1e-6, py::arg("subsample_cap") = 10000,
          py::arg("seed") = 1, "gamma = 0 selects the 1/(d*var) heuristic.")
      .def_property_readonly("rho", [](const OcsvmModel& m_) { return m_.rho; })
      .def_property_readonly("gamma", [](const OcsvmModel& m_) { return m_.gamma; })
      .def_property_readonly("nu", [](const OcsvmModel& m_) { return m_.nu; })
      .def_property_readonly("n_support",
                             [](const OcsvmModel& m_) { return m_.coefficients.size(); })
      .def_property_readonly("converged",
                             [](const OcsvmModel& m_) { return m_.converged; })
      .def(
          "scores",
          [](const OcsvmModel& m_, const F64Array& x) {
            const FloatMatrix mat = matrix_from_array(x, "query matrix");
            std::vector<double> s;
            {
              py::gil_scoped_release release;
              s = ocsvm_scores(m_, mat);
            }
            return vector_to_array(s);
          },
          py::arg("x"))
      .def("save",
           [](const OcsvmModel& m_, const std::filesystem::path& p) { save_ocsvm(m_, p); })
      .def_static("load",
                  [](const std::filesystem::path& p) { return load_ocsvm(p); });

  py::class_<LofModel>(m, "Lof",
                       "Local outlier factor; scores near 1 are inliers, larger "
                       "is more anomalous.")
      .def_static(
          "fit",
          [](const F64Array& x, std::size_t k) {
            const FloatMatrix mat = matrix_from_array(x, "training matrix");
            py::gil_scoped_release release;
            return lof_fit(mat, k);
          },
          py::arg("x"), py::arg("k") = 20)
      .def_property_readonly("k", [](const LofModel& m_) { return m_.k; })
      .def_property_readonly("size", [](const LofModel& m_) { return m_.size(); })
      .def(
          "scores",
          [](const LofModel& m_, const F64Array& x) {
            const FloatMatrix mat = matrix_from_array(x, "query matrix");
            std::vector<double> s;
            {
              py::gil_scoped_release release;
              s = lof_scores(m_, mat);
            }
            return vector_to_array(s);
          },
          py::arg("x"))
      .def("train_scores",
           [](const LofModel& m_) {
             std::vector<double> s;
             {
               py::gil_scoped_release release;
               s = lof_train_scores(m_);
             }
             return vector_to_array(s);
           })
      .def("save",
           [](const LofModel& m_, const std::filesystem::path& p) { save_lof(m_, p); })
      .def_static("load", [](const std::filesystem::path& p) { return load_lof(p); });

  py::class_<IsoForest>(m, "IsolationForest",
                        "Isolation forest; scores in (0,1), higher is more anomalous.")
      .def_static(
          "fit",
          [](const F64Array& x, std::size_t trees, std::size_t psi, std::uint64_t seed) {
            const FloatMatrix mat = matrix_from_array(x, "training matrix");
            const std::size_t eff_psi = std::min(psi, mat.rows);
            py::gil_scoped_release release;
            return iforest_fit(mat, trees, eff_psi, seed);
          },
          py::arg("x"), py::arg("trees") = 100, py::arg("psi") = 256, py::arg("seed") = 1)
      .def_property_readonly("psi", [](const IsoForest& m_) { return m_.psi; })
      .def_property_readonly("n_trees", [](const IsoForest& m_) { return m_.trees.size(); })
      .def(
          "scores",
          [](const IsoForest& m_, const F64Array& x) {
            const FloatMatrix mat = matrix_from_array(x, "query matrix");
            std::vector<double> s;
            {
              py::gil_scoped_release release;
              s = iforest_scores(m_, mat);
            }
            return vector_to_array(s);
          },
          py::arg("x"))
      .def("save",
           [](const IsoForest& m_, const std::filesystem::path& p) { save_iforest(m_, p); })
      .def_static("load", [](const std::filesystem::path& p) { return load_iforest(p); });

  m.def(
      "classical_threshold",
      [](const F64Array& scores, const U8Array& labels, const std::string& direction) {
        const ThresholdResult r =
            classical_threshold(vector_from_array(scores, "scores"),
                                labels_from_array(labels, "labels"),
                                direction_from_string(direction));
        py::dict d;
        d["threshold"] = r.threshold;
        d["f1"] = r.f1;
        d["direction"] = direction;
        return d;
      },
      py::arg("scores"), py::arg("labels"), py::arg("direction"),
      "F1-optimal cut over validation scores; direction 'low' flags scores "
      "below the cut (one-class SVM), 'high' flags scores above it.");

  m.def(
      "apply_threshold",
      [](const F64Array& scores, double threshold, const std::string& direction) {
        return labels_to_array(apply_threshold(vector_from_array(scores, "scores"),
                                               threshold,
                                               direction_from_string(direction)));
      },
      py::arg("scores"), py::arg("threshold"), py::arg("direction"));
}
