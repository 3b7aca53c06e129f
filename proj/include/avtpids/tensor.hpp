#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace avtpids {

// Dense row-major tensor of doubles.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape);  // zero-filled
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  // Same data, new shape (sizes must agree).
  Tensor reshaped(std::vector<std::size_t> shape) const;

  bool all_finite() const;
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  void fill(double v) { data_.assign(data_.size(), v); }

  // Checked multi-index access, mainly for tests and small oracles.
  template <class... Ix>
  double& at(Ix... ix) {
    return data_[offset_of({static_cast<std::size_t>(ix)...})];
  }
  template <class... Ix>
  double at(Ix... ix) const {
    return data_[offset_of({static_cast<std::size_t>(ix)...})];
  }

  static std::string shape_string(const std::vector<std::size_t>& shape);

 private:
  std::size_t offset_of(std::initializer_list<std::size_t> idx) const;

  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

// A trainable tensor with its gradient accumulator.
struct Parameter {
  std::string id;
  Tensor value;
  Tensor grad;  // same shape, zeroed between optimizer steps

  Parameter() = default;
  Parameter(std::string name, Tensor v)
      : id(std::move(name)), value(std::move(v)), grad(Tensor::zeros(value.shape())) {}
};

struct Stride2d {
  std::size_t h = 1;
  std::size_t w = 1;
};
struct Padding2d {
  std::size_t h = 0;
  std::size_t w = 0;
};
struct OutputPadding2d {
  std::size_t h = 0;
  std::size_t w = 0;
};

// --- Batched kernels (leading batch dimension) ---------------------------
//
// These are the workhorses used by the layers; the unbatched operations
// below wrap them with a batch of one.

// input [B,C,H,W], weights [F,C,kH,kW], bias [F] -> [B,F,H',W'] with
// H' = floor((H + 2p - k)/s) + 1.  Cross-correlation (no kernel flip).
Tensor conv2d_batch(const Tensor& input, const Tensor& weights, const Tensor& bias,
                    Stride2d stride, Padding2d pad);

// Gradients of conv2d_batch; `cols` caching lives in the layer, so this
// recomputes what it needs from the saved input.
void conv2d_batch_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_out,
                           Stride2d stride, Padding2d pad, Tensor& grad_input,
                           Tensor& grad_weights, Tensor& grad_bias);

// input [B,C_in,H,W], weights [C_in,C_out,kH,kW], bias [C_out] ->
// [B,C_out,H',W'] with H' = (H-1)s - 2p + k + op.  Exact adjoint of
// conv2d_batch when geometries match.
Tensor conv_transpose2d_batch(const Tensor& input, const Tensor& weights, const Tensor& bias,
                              Stride2d stride, Padding2d pad, OutputPadding2d out_pad);

void conv_transpose2d_batch_backward(const Tensor& input, const Tensor& weights,
                                     const Tensor& grad_out, Stride2d stride, Padding2d pad,
                                     OutputPadding2d out_pad, Tensor& grad_input,
                                     Tensor& grad_weights, Tensor& grad_bias);

// input [B,n], weights [m,n], bias [m] -> [B,m]
Tensor linear_batch(const Tensor& input, const Tensor& weights, const Tensor& bias);
void linear_batch_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_out,
                           Tensor& grad_input, Tensor& grad_weights, Tensor& grad_bias);

// --- Spec-level single-sample operations ---------------------------------

// input [C,H,W], weights [F,C,kH,kW], bias [F] -> [F,H',W']
Tensor conv2d(const Tensor& input, const Tensor& weights, const Tensor& bias, Stride2d stride,
              Padding2d pad);

// input [C_in,H,W], weights [C_in,C_out,kH,kW], bias [C_out] -> [C_out,H',W']
Tensor conv_transpose2d(const Tensor& input, const Tensor& weights, const Tensor& bias,
                        Stride2d stride, Padding2d pad, OutputPadding2d out_pad);

// input [n], weights [m,n], bias [m] -> [m]
Tensor linear(const Tensor& input, const Tensor& weights, const Tensor& bias);

// Elementwise activations and their derivatives at the given input.
Tensor relu(const Tensor& x);
Tensor relu_grad(const Tensor& x);  // d relu / dx, using the 0 subgradient at 0
Tensor sigmoid(const Tensor& x);
Tensor sigmoid_grad(const Tensor& x);
Tensor tanh_act(const Tensor& x);
Tensor tanh_grad(const Tensor& x);

// Mean over all elements of the squared difference.
double mse_loss(const Tensor& prediction, const Tensor& target);
// d mse / d prediction = 2 (prediction - target) / n
Tensor mse_loss_grad(const Tensor& prediction, const Tensor& target);

// One LSTM cell with separate per-gate matrices and two bias vectors per
// gate.  This mirrors the published equations directly and doubles as the
// reference the packed training layer is tested against.
struct LstmCellParams {
  Tensor W_xi, W_xf, W_xa, W_xo;      // [hidden, input]
  Tensor W_hi, W_hf, W_ha, W_ho;      // [hidden, hidden]
  Tensor b_ihi, b_ihf, b_iha, b_iho;  // [hidden]
  Tensor b_hhi, b_hhf, b_hha, b_hho;  // [hidden]

  std::size_t hidden() const { return W_xi.empty() ? 0 : W_xi.dim(0); }
  std::size_t input() const { return W_xi.empty() ? 0 : W_xi.dim(1); }
};

// x_t [d], h_prev [h], c_prev [h] -> (h_t, c_t)
std::pair<Tensor, Tensor> lstm_cell(const Tensor& x_t, const Tensor& h_prev,
                                    const Tensor& c_prev, const LstmCellParams& params);

// inputs [T,d]; zero initial state.  Returns [T,h] (all states) or [h] (last).
Tensor lstm_sequence(const Tensor& inputs, const LstmCellParams& params, bool return_all);

}  // namespace avtpids
