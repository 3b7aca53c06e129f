#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "avtpids/layers.hpp"
#include "avtpids/optim.hpp"
#include "avtpids/tensor.hpp"
#include "avtpids/windows.hpp"

namespace avtpids {

enum class ModelKind { kCae, kLstmAe };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

// An autoencoder over window images.  Both architectures take [B,w,58]
// batches of byte images scaled into [0,1] and reconstruct the same shape.
class Model {
 public:
  // Convolutional autoencoder; w must be one of the supported window lengths
  // (all divisible by 8, which the halving geometry requires).
  static Model cae(std::size_t w);
  // LSTM autoencoder with a 10-wide embedding; any w >= 1.
  static Model lstm_ae(std::size_t w);

  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  ModelKind kind() const { return kind_; }
  std::size_t window_length() const { return w_; }
  std::string name() const { return to_string(kind_); }

  Sequential& net() { return net_; }
  const Sequential& net() const { return net_; }

  // Seeded uniform ±1/sqrt(fan_in) reset of every parameter.
  void init_params(std::uint64_t seed);

  // [B,w,58] -> [B,w,58]; training=true arms the backward pass.
  Tensor forward_batch(const Tensor& images, bool training = false);

  std::size_t param_count() { return net_.param_count(); }

  // Mean/stddev of per-sample reconstruction errors on normal training data,
  // set by train_model (population statistics).
  bool has_error_stats() const { return has_stats_; }
  double error_mean() const;
  double error_std() const;
  void set_error_stats(double mu, double sigma);

 private:
  Model(ModelKind kind, std::size_t w) : kind_(kind), w_(w) {}

  ModelKind kind_;
  std::size_t w_;
  Sequential net_;
  bool has_stats_ = false;
  double err_mu_ = 0.0;
  double err_sigma_ = 0.0;
};

struct TrainConfig {
  double lr = 1e-4;
  std::size_t batch_size = 16;
  std::size_t max_epochs = 200;
  std::size_t patience = 10;
  std::uint64_t seed = 1;
  std::size_t eval_batch = 64;
  bool verbose = false;  // per-epoch progress on stderr
};

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
  std::size_t best_epoch = 0;  // 1-based epoch with the lowest val loss
  double best_val_loss = std::numeric_limits<double>::infinity();
  bool early_stopped = false;
};

// Extracts the window images at indices[offset..offset+count) as a
// [count,w,58] batch scaled into [0,1].
Tensor window_batch(const WindowSet& windows, const std::vector<std::size_t>& indices,
                    std::size_t offset, std::size_t count);

// Minimizes mean squared reconstruction error with Adam over mini-batches;
// stops early when the validation loss fails to improve for
// `config.patience` epochs and restores the best-epoch parameters.  Every
// window referenced by either index list must be labeled normal; an abnormal
// one raises ContaminationError.  On return the model carries the mu/sigma
// statistics of its per-sample training-set errors.
TrainHistory train_model(Model& model, const WindowSet& windows,
                         const std::vector<std::size_t>& train_indices,
                         const std::vector<std::size_t>& val_indices,
                         const TrainConfig& config);

// Per-sample mean squared reconstruction error for the selected windows.
std::vector<double> reconstruction_errors(Model& model, const WindowSet& windows,
                                          const std::vector<std::size_t>& indices,
                                          std::size_t eval_batch = 64);

// Error of a single [w,58] image.
double reconstruction_error(Model& model, const Tensor& image);

// ---------------------------------------------------------------------------
// Checkpointing

enum class CheckpointDtype { kF64, kF32 };

struct AdamSnapshot {
  std::vector<Tensor> m, v;
  std::uint64_t t = 0;
};

// Versioned container: magic, JSON header (architecture, parameter table,
// error stats), then raw parameter data.  kF64 round-trips bitwise; kF32 is
// the compact inference format.  Optimizer state is stored only with kF64.
void save_model(Model& model, const std::filesystem::path& path,
                CheckpointDtype dtype = CheckpointDtype::kF64,
                const Adam* optimizer = nullptr);

// Rebuilds the architecture recorded in the checkpoint and loads its
// parameters.  When `optimizer_state` is non-null and the file carries Adam
// state, the snapshot is filled in.
Model load_model(const std::filesystem::path& path, AdamSnapshot* optimizer_state = nullptr);

// Delimited text: epoch, train loss, val loss.
void save_history(const TrainHistory& history, const std::filesystem::path& path);
TrainHistory load_history(const std::filesystem::path& path);

}  // namespace avtpids
