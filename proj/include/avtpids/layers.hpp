#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "avtpids/tensor.hpp"

namespace avtpids {

// Fills a tensor with uniform values in [-bound, bound].  Draws are derived
// from the raw 64-bit stream so results are identical across platforms.
void uniform_fill(Tensor& t, double bound, std::mt19937_64& rng);

// One trainable batched layer.  forward(x, training=true) caches whatever the
// matching backward pass needs; backward propagates the loss gradient to the
// layer input and accumulates parameter gradients.
class Layer {
 public:
  virtual ~Layer() = default;
  Layer(const Layer&) = delete;
  Layer& operator=(const Layer&) = delete;

  virtual Tensor forward(const Tensor& input, bool training) = 0;
  virtual Tensor backward(const Tensor& grad_output) = 0;
  virtual std::vector<Parameter*> params() { return {}; }
  virtual std::string describe() const = 0;
  // Seeded weight reset; layers without parameters ignore it.
  virtual void init_params(std::mt19937_64&) {}

 protected:
  Layer() = default;
};

class Conv2dLayer final : public Layer {
 public:
  Conv2dLayer(std::size_t in_channels, std::size_t out_channels, std::size_t kernel_h,
              std::size_t kernel_w, Stride2d stride, Padding2d pad);
  Tensor forward(const Tensor& input, bool training) override;
  Tensor backward(const Tensor& grad_output) override;
  std::vector<Parameter*> params() override;
  std::string describe() const override;
  void init_params(std::mt19937_64& rng) override;

 private:
  std::size_t in_channels_, out_channels_, kernel_h_, kernel_w_;
  Stride2d stride_;
  Padding2d pad_;
  Parameter weight_, bias_;
  Tensor cached_input_;
  bool has_cache_ = false;
};

class ConvTranspose2dLayer final : public Layer {
 public:
  ConvTranspose2dLayer(std::size_t in_channels, std::size_t out_channels, std::size_t kernel_h,
                       std::size_t kernel_w, Stride2d stride, Padding2d pad,
                       OutputPadding2d out_pad);
  Tensor forward(const Tensor& input, bool training) override;
  Tensor backward(const Tensor& grad_output) override;
  std::vector<Parameter*> params() override;
  std::string describe() const override;
  void init_params(std::mt19937_64& rng) override;

 private:
  std::size_t in_channels_, out_channels_, kernel_h_, kernel_w_;
  Stride2d stride_;
  Padding2d pad_;
  OutputPadding2d out_pad_;
  Parameter weight_, bias_;
  Tensor cached_input_;
  bool has_cache_ = false;
};

class LinearLayer final : public Layer {
 public:
  LinearLayer(std::size_t in_features, std::size_t out_features);
  Tensor forward(const Tensor& input, bool training) override;
  Tensor backward(const Tensor& grad_output) override;
  std::vector<Parameter*> params() override;
  std::string describe() const override;
  void init_params(std::mt19937_64& rng) override;

 private:
  std::size_t in_features_, out_features_;
  Parameter weight_, bias_;
  Tensor cached_input_;
  bool has_cache_ = false;
};

// Affine map applied independently at every timestep of a [B,T,n] sequence.
class TimeDistributedLinearLayer final : public Layer {
 public:
  TimeDistributedLinearLayer(std::size_t in_features, std::size_t out_features);
  Tensor forward(const Tensor& input, bool training) override;
  Tensor backward(const Tensor& grad_output) override;
  std::vector<Parameter*> params() override;
  std::string describe() const override;
  void init_params(std::mt19937_64& rng) override;

 private:
  std::size_t in_features_, out_features_;
  Parameter weight_, bias_;
  Tensor cached_input_;
  bool has_cache_ = false;
};

class ReluLayer final : public Layer {
 public:
  Tensor forward(const Tensor& input, bool training) override;
  Tensor backward(const Tensor& grad_output) override;
  std::string describe() const override;

 private:
  Tensor cached_input_;
  bool has_cache_ = false;
};

// Reshapes every batch item to `item_shape` (the batch dimension is kept).
class ReshapeLayer final : public Layer {
 public:
  explicit ReshapeLayer(std::vector<std::size_t> item_shape);
  Tensor forward(const Tensor& input, bool training) override;
  Tensor backward(const Tensor& grad_output) override;
  std::string describe() const override;

 private:
  std::vector<std::size_t> item_shape_;
  std::vector<std::size_t> cached_in_shape_;
  bool has_cache_ = false;
};

// Flattens [B, ...] to [B, prod(...)].
class FlattenLayer final : public Layer {
 public:
  Tensor forward(const Tensor& input, bool training) override;
  Tensor backward(const Tensor& grad_output) override;
  std::string describe() const override;

 private:
  std::vector<std::size_t> cached_in_shape_;
  bool has_cache_ = false;
};

// Repeats a [B,h] vector T times into a [B,T,h] sequence.
class RepeatLayer final : public Layer {
 public:
  explicit RepeatLayer(std::size_t times);
  Tensor forward(const Tensor& input, bool training) override;
  Tensor backward(const Tensor& grad_output) override;
  std::string describe() const override;

 private:
  std::size_t times_;
  std::vector<std::size_t> cached_in_shape_;
  bool has_cache_ = false;
};

// Single LSTM layer over [B,T,input]; emits all hidden states [B,T,hidden] or
// only the final one [B,hidden].  Gates are packed row-wise in the order
// input, forget, candidate, output; each gate adds an input-side and a
// hidden-side bias.
class LstmLayer final : public Layer {
 public:
  LstmLayer(std::size_t input_size, std::size_t hidden_size, bool return_all);
  Tensor forward(const Tensor& input, bool training) override;
  Tensor backward(const Tensor& grad_output) override;
  std::vector<Parameter*> params() override;
  std::string describe() const override;
  void init_params(std::mt19937_64& rng) override;

  std::size_t hidden_size() const { return hidden_; }
  // Unpacks the trained weights into the per-gate reference layout.
  LstmCellParams cell_params() const;

 private:
  std::size_t input_, hidden_;
  bool return_all_;
  Parameter w_ih_, w_hh_, b_ih_, b_hh_;  // [4h,d], [4h,h], [4h], [4h]
  Tensor cached_input_;                  // [B,T,d]
  std::vector<Tensor> gates_;            // per t: [B,4h] post-activation
  std::vector<Tensor> cells_;            // per t: [B,h] (c_t)
  std::vector<Tensor> hiddens_;          // per t+1 entries incl. h_0: [B,h]
  bool has_cache_ = false;
};

// Ordered container of layers; owns them and exposes the concatenated
// parameter list.  Parameter ids are prefixed with the layer position.
class Sequential {
 public:
  Sequential() = default;
  Sequential(Sequential&&) = default;
  Sequential& operator=(Sequential&&) = default;

  Layer& add(std::unique_ptr<Layer> layer);
  template <class L, class... Args>
  L& emplace(Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L& ref = *layer;
    add(std::move(layer));
    return ref;
  }

  Tensor forward(const Tensor& input, bool training = false);
  // Propagates the loss gradient backwards through every layer and returns
  // the gradient w.r.t. the network input.
  Tensor backward(const Tensor& grad_output);

  std::vector<Parameter*> params();
  std::size_t param_count();
  void init_params(std::mt19937_64& rng);
  // Output shape of every layer for the given input, without caching.
  std::vector<std::vector<std::size_t>> forward_shapes(const Tensor& input);
  std::vector<std::string> describe() const;
  std::size_t layer_count() const { return layers_.size(); }
  Layer& layer(std::size_t i) { return *layers_.at(i); }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
  bool forward_ran_ = false;
};

}  // namespace avtpids
