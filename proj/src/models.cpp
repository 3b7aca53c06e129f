#include "avtpids/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "avtpids/errors.hpp"
#include "json.hpp"

namespace avtpids {

namespace {

constexpr char kModelMagic[8] = {'A', 'V', 'T', 'P', 'M', 'O', 'D', 'L'};
constexpr std::uint32_t kModelVersion = 1;

void fisher_yates(std::vector<std::size_t>& items, std::mt19937_64& rng) {
  for (std::size_t i = items.size(); i-- > 1;) {
    const std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
    std::swap(items[i], items[j]);
  }
}

void check_indices(const WindowSet& windows, const std::vector<std::size_t>& indices,
                   const char* which) {
  for (std::size_t k : indices) {
    if (k >= windows.count()) {
      throw InvalidArgumentError(std::string(which) + " index " + std::to_string(k) +
                                 " out of range for " + std::to_string(windows.count()) +
                                 " windows");
    }
    if (windows.labels.at(k) != 0) {
      throw ContaminationError("window " + std::to_string(k) +
                               " is labeled abnormal; autoencoders train on normal data only");
    }
  }
}

// Mean squared error per batch item: out[i] = mean_j (a[i,j]-b[i,j])^2.
void per_sample_errors(const Tensor& pred, const Tensor& target, std::vector<double>& out) {
  const std::size_t B = pred.dim(0);
  const std::size_t n = pred.size() / B;
  for (std::size_t b = 0; b < B; ++b) {
    const double* a = pred.data() + b * n;
    const double* t = target.data() + b * n;
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double d = a[j] - t[j];
      acc += d * d;
    }
    out.push_back(acc / static_cast<double>(n));
  }
}

void write_exact(std::ofstream& out, const void* data, std::size_t len) {
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(len));
}

void read_exact(std::ifstream& in, void* data, std::size_t len, const char* what) {
  in.read(static_cast<char*>(data), static_cast<std::streamsize>(len));
  if (static_cast<std::size_t>(in.gcount()) != len) {
    throw FormatError(std::string("model checkpoint truncated while reading ") + what);
  }
}

}  // namespace

std::string to_string(ModelKind kind) {
  return kind == ModelKind::kCae ? "cae" : "lstm_ae";
}

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "cae") return ModelKind::kCae;
  if (name == "lstm_ae") return ModelKind::kLstmAe;
  throw InvalidArgumentError("unknown model kind '" + name + "' (expected cae or lstm_ae)");
}

Model Model::cae(std::size_t w) {
  validate_window_length(w);
  Model m(ModelKind::kCae, w);
  Sequential& net = m.net_;
  net.emplace<ReshapeLayer>(std::vector<std::size_t>{1, w, 58});
  net.emplace<Conv2dLayer>(1, 32, 3, 3, Stride2d{2, 2}, Padding2d{1, 1});
  net.emplace<ReluLayer>();
  net.emplace<Conv2dLayer>(32, 64, 3, 3, Stride2d{2, 2}, Padding2d{1, 1});
  net.emplace<ReluLayer>();
  net.emplace<Conv2dLayer>(64, 128, 3, 3, Stride2d{2, 2}, Padding2d{1, 1});
  net.emplace<ReluLayer>();
  net.emplace<FlattenLayer>();
  net.emplace<LinearLayer>(128 * w, 64 * w);
  net.emplace<ReluLayer>();
  net.emplace<LinearLayer>(64 * w, 128 * w);
  net.emplace<ReluLayer>();
  net.emplace<ReshapeLayer>(std::vector<std::size_t>{128, w / 8, 8});
  net.emplace<ConvTranspose2dLayer>(128, 64, 3, 3, Stride2d{2, 2}, Padding2d{1, 1},
                                    OutputPadding2d{1, 0});
  net.emplace<ReluLayer>();
  net.emplace<ConvTranspose2dLayer>(64, 32, 3, 3, Stride2d{2, 2}, Padding2d{1, 1},
                                    OutputPadding2d{1, 0});
  net.emplace<ReluLayer>();
  net.emplace<ConvTranspose2dLayer>(32, 1, 3, 3, Stride2d{2, 2}, Padding2d{1, 1},
                                    OutputPadding2d{1, 1});
  net.emplace<ReluLayer>();
  net.emplace<ReshapeLayer>(std::vector<std::size_t>{w, 58});
  return m;
}

Model Model::lstm_ae(std::size_t w) {
  if (w == 0) throw InvalidArgumentError("window length must be positive");
  Model m(ModelKind::kLstmAe, w);
  Sequential& net = m.net_;
  net.emplace<LstmLayer>(58, 20, true);
  net.emplace<LstmLayer>(20, 10, false);
  net.emplace<RepeatLayer>(w);
  net.emplace<LstmLayer>(10, 10, true);
  net.emplace<LstmLayer>(10, 20, true);
  net.emplace<TimeDistributedLinearLayer>(20, 58);
  return m;
}

void Model::init_params(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  net_.init_params(rng);
}

Tensor Model::forward_batch(const Tensor& images, bool training) {
  if (images.rank() != 3 || images.dim(1) != w_ || images.dim(2) != kFeatureBytes) {
    throw DimensionError(name() + " expects [B," + std::to_string(w_) + ",58] input, got " +
                         Tensor::shape_string(images.shape()));
  }
  return net_.forward(images, training);
}

double Model::error_mean() const {
  if (!has_stats_) throw StateError("model carries no training-error statistics yet");
  return err_mu_;
}

double Model::error_std() const {
  if (!has_stats_) throw StateError("model carries no training-error statistics yet");
  return err_sigma_;
}

void Model::set_error_stats(double mu, double sigma) {
  if (!(std::isfinite(mu) && std::isfinite(sigma)) || sigma < 0.0) {
    throw InvalidArgumentError("error statistics must be finite with sigma >= 0");
  }
  err_mu_ = mu;
  err_sigma_ = sigma;
  has_stats_ = true;
}

Tensor window_batch(const WindowSet& windows, const std::vector<std::size_t>& indices,
                    std::size_t offset, std::size_t count) {
  if (offset + count > indices.size()) {
    throw InvalidArgumentError("window batch range exceeds the index list");
  }
  Tensor out({count, windows.w, kFeatureBytes});
  double* dst = out.data();
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t k = indices[offset + i];
    if (k >= windows.count()) {
      throw InvalidArgumentError("window index " + std::to_string(k) + " out of range");
    }
    for (std::size_t r = 0; r < windows.w; ++r) {
      const FeatureVector& row = windows.features[k + r];
      for (std::size_t c = 0; c < kFeatureBytes; ++c) {
        *dst++ = static_cast<double>(row[c]) / 255.0;
      }
    }
  }
  return out;
}

TrainHistory train_model(Model& model, const WindowSet& windows,
                         const std::vector<std::size_t>& train_indices,
                         const std::vector<std::size_t>& val_indices,
                         const TrainConfig& config) {
  if (train_indices.empty()) throw InvalidArgumentError("training index list is empty");
  if (val_indices.empty()) throw InvalidArgumentError("validation index list is empty");
  if (config.batch_size == 0) throw InvalidArgumentError("batch size must be positive");
  if (config.max_epochs == 0) throw InvalidArgumentError("max epochs must be positive");
  check_indices(windows, train_indices, "train");
  check_indices(windows, val_indices, "validation");

  Adam optimizer(model.net().params(), config.lr);
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order = train_indices;
  const std::size_t n_train = order.size();

  auto snapshot = [&] {
    std::vector<Tensor> vals;
    for (Parameter* p : model.net().params()) vals.push_back(p->value);
    return vals;
  };
  auto restore = [&](const std::vector<Tensor>& vals) {
    auto params = model.net().params();
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = vals[i];
  };

  auto eval_loss = [&](const std::vector<std::size_t>& idx) {
    double acc = 0.0;
    for (std::size_t start = 0; start < idx.size(); start += config.eval_batch) {
      const std::size_t count = std::min(config.eval_batch, idx.size() - start);
      Tensor x = window_batch(windows, idx, start, count);
      Tensor out = model.forward_batch(x, false);
      acc += mse_loss(out, x) * static_cast<double>(count);
    }
    return acc / static_cast<double>(idx.size());
  };

  TrainHistory history;
  std::vector<Tensor> best = snapshot();
  std::size_t epochs_without_improvement = 0;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    fisher_yates(order, rng);
    double train_acc = 0.0;
    for (std::size_t start = 0; start < n_train; start += config.batch_size) {
      const std::size_t count = std::min(config.batch_size, n_train - start);
      Tensor x = window_batch(windows, order, start, count);
      Tensor out = model.forward_batch(x, true);
      train_acc += mse_loss(out, x) * static_cast<double>(count);
      model.net().backward(mse_loss_grad(out, x));
      optimizer.step();
    }
    const double train_loss = train_acc / static_cast<double>(n_train);
    const double val_loss = eval_loss(val_indices);
    history.epochs.push_back({epoch, train_loss, val_loss});
    if (config.verbose) {
      std::fprintf(stderr, "[train] %s w=%zu epoch %zu/%zu train=%.6g val=%.6g\n",
                   model.name().c_str(), model.window_length(), epoch, config.max_epochs,
                   train_loss, val_loss);
    }

    if (val_loss < history.best_val_loss) {
      history.best_val_loss = val_loss;
      history.best_epoch = epoch;
      best = snapshot();
      epochs_without_improvement = 0;
    } else {
      ++epochs_without_improvement;
      if (epochs_without_improvement >= config.patience) {
        history.early_stopped = true;
        break;
      }
    }
  }
  restore(best);

  const std::vector<double> errors =
      reconstruction_errors(model, windows, train_indices, config.eval_batch);
  double mu = 0.0;
  for (double e : errors) mu += e;
  mu /= static_cast<double>(errors.size());
  double var = 0.0;
  for (double e : errors) var += (e - mu) * (e - mu);
  var /= static_cast<double>(errors.size());
  model.set_error_stats(mu, std::sqrt(var));
  return history;
}

std::vector<double> reconstruction_errors(Model& model, const WindowSet& windows,
                                          const std::vector<std::size_t>& indices,
                                          std::size_t eval_batch) {
  if (eval_batch == 0) throw InvalidArgumentError("evaluation batch size must be positive");
  std::vector<double> errors;
  errors.reserve(indices.size());
  for (std::size_t start = 0; start < indices.size(); start += eval_batch) {
    const std::size_t count = std::min(eval_batch, indices.size() - start);
    Tensor x = window_batch(windows, indices, start, count);
    Tensor out = model.forward_batch(x, false);
    per_sample_errors(out, x, errors);
  }
  return errors;
}

double reconstruction_error(Model& model, const Tensor& image) {
  if (image.rank() != 2) {
    throw DimensionError("expected a [w,58] window image, got " +
                         Tensor::shape_string(image.shape()));
  }
  Tensor batch = image.reshaped({1, image.dim(0), image.dim(1)});
  Tensor out = model.forward_batch(batch, false);
  return mse_loss(out, batch);
}

// ---------------------------------------------------------------------------
// Checkpointing

void save_model(Model& model, const std::filesystem::path& path, CheckpointDtype dtype,
                const Adam* optimizer) {
  if (optimizer != nullptr && dtype != CheckpointDtype::kF64) {
    throw InvalidArgumentError("optimizer state requires the f64 checkpoint format");
  }
  auto params = model.net().params();

  nlohmann::json header;
  header["kind"] = model.name();
  header["w"] = model.window_length();
  header["dtype"] = dtype == CheckpointDtype::kF64 ? "f64" : "f32";
  header["layers"] = model.net().describe();
  nlohmann::json plist = nlohmann::json::array();
  for (Parameter* p : params) {
    plist.push_back({{"id", p->id}, {"shape", p->value.shape()}});
  }
  header["params"] = std::move(plist);
  if (model.has_error_stats()) {
    header["error_stats"] = {{"mu", model.error_mean()}, {"sigma", model.error_std()}};
  }
  if (optimizer != nullptr) {
    header["adam"] = {{"t", optimizer->step_count()},
                      {"lr", optimizer->learning_rate()}};
  }
  const std::string header_text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_exact(out, kModelMagic, sizeof(kModelMagic));
  const std::uint32_t version = kModelVersion;
  write_exact(out, &version, sizeof(version));
  const std::uint64_t header_len = header_text.size();
  write_exact(out, &header_len, sizeof(header_len));
  write_exact(out, header_text.data(), header_text.size());

  for (Parameter* p : params) {
    if (dtype == CheckpointDtype::kF64) {
      write_exact(out, p->value.data(), p->value.size() * sizeof(double));
    } else {
      std::vector<float> narrow(p->value.size());
      for (std::size_t i = 0; i < narrow.size(); ++i) {
        narrow[i] = static_cast<float>(p->value.data()[i]);
      }
      write_exact(out, narrow.data(), narrow.size() * sizeof(float));
    }
  }
  if (optimizer != nullptr) {
    for (const Tensor& t : optimizer->first_moments()) {
      write_exact(out, t.data(), t.size() * sizeof(double));
    }
    for (const Tensor& t : optimizer->second_moments()) {
      write_exact(out, t.data(), t.size() * sizeof(double));
    }
  }
  out.flush();
  if (!out) throw IoError("failed writing model checkpoint to " + path.string());
}

Model load_model(const std::filesystem::path& path, AdamSnapshot* optimizer_state) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model checkpoint " + path.string());

  char magic[8];
  read_exact(in, magic, sizeof(magic), "magic");
  if (std::memcmp(magic, kModelMagic, sizeof(magic)) != 0) {
    throw FormatError(path.string() + " is not a model checkpoint");
  }
  std::uint32_t version = 0;
  read_exact(in, &version, sizeof(version), "version");
  if (version != kModelVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  std::uint64_t header_len = 0;
  read_exact(in, &header_len, sizeof(header_len), "header length");
  if (header_len == 0 || header_len > (1u << 24)) {
    throw FormatError("implausible checkpoint header length");
  }
  std::string header_text(header_len, '\0');
  read_exact(in, header_text.data(), header_len, "header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("corrupt checkpoint header: ") + e.what());
  }

  const ModelKind kind = model_kind_from_string(header.at("kind").get<std::string>());
  const std::size_t w = header.at("w").get<std::size_t>();
  const std::string dtype = header.at("dtype").get<std::string>();
  if (dtype != "f64" && dtype != "f32") {
    throw FormatError("unknown checkpoint dtype '" + dtype + "'");
  }

  Model model = kind == ModelKind::kCae ? Model::cae(w) : Model::lstm_ae(w);
  const auto expect_layers = model.net().describe();
  const auto got_layers = header.at("layers").get<std::vector<std::string>>();
  if (got_layers != expect_layers) {
    throw FormatError("checkpoint layer list does not match the " + model.name() +
                      " architecture for w=" + std::to_string(w));
  }
  auto params = model.net().params();
  const auto& plist = header.at("params");
  if (plist.size() != params.size()) {
    throw FormatError("checkpoint parameter table size mismatch");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (plist[i].at("id").get<std::string>() != params[i]->id ||
        plist[i].at("shape").get<std::vector<std::size_t>>() != params[i]->value.shape()) {
      throw FormatError("checkpoint parameter " + std::to_string(i) +
                        " does not match the architecture");
    }
  }

  for (Parameter* p : params) {
    if (dtype == "f64") {
      read_exact(in, p->value.data(), p->value.size() * sizeof(double), p->id.c_str());
    } else {
      std::vector<float> narrow(p->value.size());
      read_exact(in, narrow.data(), narrow.size() * sizeof(float), p->id.c_str());
      for (std::size_t i = 0; i < narrow.size(); ++i) {
        p->value.data()[i] = static_cast<double>(narrow[i]);
      }
    }
    if (!p->value.all_finite()) {
      throw FormatError("checkpoint parameter " + p->id + " contains non-finite values");
    }
  }

  if (header.contains("error_stats")) {
    model.set_error_stats(header["error_stats"].at("mu").get<double>(),
                          header["error_stats"].at("sigma").get<double>());
  }
  if (header.contains("adam") && optimizer_state != nullptr) {
    optimizer_state->t = header["adam"].at("t").get<std::uint64_t>();
    optimizer_state->m.clear();
    optimizer_state->v.clear();
    for (Parameter* p : params) {
      Tensor t(p->value.shape());
      read_exact(in, t.data(), t.size() * sizeof(double), "adam m");
      optimizer_state->m.push_back(std::move(t));
    }
    for (Parameter* p : params) {
      Tensor t(p->value.shape());
      read_exact(in, t.data(), t.size() * sizeof(double), "adam v");
      optimizer_state->v.push_back(std::move(t));
    }
  }
  return model;
}

void save_history(const TrainHistory& history, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "epoch,train_loss,val_loss\n";
  char line[96];
  for (const EpochStats& e : history.epochs) {
    std::snprintf(line, sizeof(line), "%zu,%.17g,%.17g\n", e.epoch, e.train_loss, e.val_loss);
    out << line;
  }
  if (!out) throw IoError("failed writing history to " + path.string());
}

TrainHistory load_history(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open history file " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "epoch,train_loss,val_loss") {
    throw FormatError(path.string() + " is not a training history file");
  }
  TrainHistory history;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    EpochStats e;
    std::istringstream row(line);
    char c1 = 0, c2 = 0;
    if (!(row >> e.epoch >> c1 >> e.train_loss >> c2 >> e.val_loss) || c1 != ',' || c2 != ',') {
      throw FormatError("malformed history row: " + line);
    }
    history.epochs.push_back(e);
    if (e.val_loss < history.best_val_loss) {
      history.best_val_loss = e.val_loss;
      history.best_epoch = e.epoch;
    }
  }
  return history;
}

}  // namespace avtpids
