#include "avtpids/tensor.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <cstring>
#include <numeric>

#include "avtpids/errors.hpp"

namespace avtpids {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using MapConstMat = Eigen::Map<const RowMat>;
using MapVec = Eigen::Map<Eigen::VectorXd>;
using MapConstVec = Eigen::Map<const Eigen::VectorXd>;

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         [](std::size_t a, std::size_t b) { return a * b; });
}

[[noreturn]] void shape_error(const std::string& what, const Tensor& t) {
  throw DimensionError(what + ", got shape " + Tensor::shape_string(t.shape()));
}

std::size_t conv_out_extent(std::size_t in, std::size_t pad, std::size_t k, std::size_t stride,
                            const char* axis) {
  if (in + 2 * pad < k) {
    throw DimensionError(std::string("kernel does not fit along ") + axis + ": extent " +
                         std::to_string(in) + " + 2*" + std::to_string(pad) + " < " +
                         std::to_string(k));
  }
  if (stride == 0) throw DimensionError("stride must be positive");
  return (in + 2 * pad - k) / stride + 1;
}

// Gathers kernel patches: image [C,H,W] -> cols [C*kH*kW, P] where the P
// positions scan the (H',W') grid row-major.  `cols` points at column base
// `col0` of a matrix with `ld` columns.
void im2col(const double* img, std::size_t C, std::size_t H, std::size_t W, std::size_t kH,
            std::size_t kW, Stride2d s, Padding2d p, std::size_t Hp, std::size_t Wp,
            double* cols, std::size_t ld, std::size_t col0) {
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t i = 0; i < kH; ++i) {
      for (std::size_t j = 0; j < kW; ++j) {
        double* row = cols + ((c * kH + i) * kW + j) * ld + col0;
        for (std::size_t oh = 0; oh < Hp; ++oh) {
          const std::ptrdiff_t ih =
              static_cast<std::ptrdiff_t>(oh * s.h + i) - static_cast<std::ptrdiff_t>(p.h);
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(H)) {
            for (std::size_t ow = 0; ow < Wp; ++ow) row[oh * Wp + ow] = 0.0;
            continue;
          }
          const double* src = img + (c * H + static_cast<std::size_t>(ih)) * W;
          for (std::size_t ow = 0; ow < Wp; ++ow) {
            const std::ptrdiff_t iw =
                static_cast<std::ptrdiff_t>(ow * s.w + j) - static_cast<std::ptrdiff_t>(p.w);
            row[oh * Wp + ow] =
                (iw < 0 || iw >= static_cast<std::ptrdiff_t>(W)) ? 0.0 : src[iw];
          }
        }
      }
    }
  }
}

// Scatter-adds cols back into the image: exact adjoint of im2col.
void col2im(const double* cols, std::size_t ld, std::size_t col0, std::size_t C, std::size_t H,
            std::size_t W, std::size_t kH, std::size_t kW, Stride2d s, Padding2d p,
            std::size_t Hp, std::size_t Wp, double* img) {
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t i = 0; i < kH; ++i) {
      for (std::size_t j = 0; j < kW; ++j) {
        const double* row = cols + ((c * kH + i) * kW + j) * ld + col0;
        for (std::size_t oh = 0; oh < Hp; ++oh) {
          const std::ptrdiff_t ih =
              static_cast<std::ptrdiff_t>(oh * s.h + i) - static_cast<std::ptrdiff_t>(p.h);
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(H)) continue;
          double* dst = img + (c * H + static_cast<std::size_t>(ih)) * W;
          for (std::size_t ow = 0; ow < Wp; ++ow) {
            const std::ptrdiff_t iw =
                static_cast<std::ptrdiff_t>(ow * s.w + j) - static_cast<std::ptrdiff_t>(p.w);
            if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(W)) continue;
            dst[iw] += row[oh * Wp + ow];
          }
        }
      }
    }
  }
}

void check_conv_batch_args(const Tensor& input, const Tensor& weights, const Tensor& bias,
                           bool transpose) {
  if (input.rank() != 4) shape_error("conv input must be [B,C,H,W]", input);
  if (weights.rank() != 4) shape_error("conv weights must be 4-D", weights);
  if (bias.rank() != 1) shape_error("conv bias must be 1-D", bias);
  const std::size_t in_ch = input.dim(1);
  const std::size_t w_in = weights.dim(transpose ? 0 : 1);
  const std::size_t w_out = weights.dim(transpose ? 1 : 0);
  if (w_in != in_ch) {
    throw DimensionError("conv weights expect " + std::to_string(w_in) +
                         " input channels, input has " + std::to_string(in_ch));
  }
  if (bias.dim(0) != w_out) {
    throw DimensionError("conv bias length " + std::to_string(bias.dim(0)) +
                         " does not match " + std::to_string(w_out) + " output channels");
  }
}

Tensor unsqueeze0(const Tensor& t) {
  std::vector<std::size_t> s{1};
  s.insert(s.end(), t.shape().begin(), t.shape().end());
  return t.reshaped(std::move(s));
}

Tensor squeeze0(const Tensor& t) {
  std::vector<std::size_t> s(t.shape().begin() + 1, t.shape().end());
  return t.reshaped(std::move(s));
}

void check_cell_params(const LstmCellParams& p) {
  const std::size_t h = p.hidden();
  const std::size_t d = p.input();
  auto expect = [](const Tensor& t, std::initializer_list<std::size_t> shape,
                   const char* name) {
    if (t.shape() != std::vector<std::size_t>(shape)) {
      throw DimensionError(std::string("LSTM parameter ") + name + " has shape " +
                           Tensor::shape_string(t.shape()) + ", expected " +
                           Tensor::shape_string(std::vector<std::size_t>(shape)));
    }
  };
  expect(p.W_xi, {h, d}, "W_xi");
  expect(p.W_xf, {h, d}, "W_xf");
  expect(p.W_xa, {h, d}, "W_xa");
  expect(p.W_xo, {h, d}, "W_xo");
  expect(p.W_hi, {h, h}, "W_hi");
  expect(p.W_hf, {h, h}, "W_hf");
  expect(p.W_ha, {h, h}, "W_ha");
  expect(p.W_ho, {h, h}, "W_ho");
  expect(p.b_ihi, {h}, "b_ihi");
  expect(p.b_ihf, {h}, "b_ihf");
  expect(p.b_iha, {h}, "b_iha");
  expect(p.b_iho, {h}, "b_iho");
  expect(p.b_hhi, {h}, "b_hhi");
  expect(p.b_hhf, {h}, "b_hhf");
  expect(p.b_hha, {h}, "b_hha");
  expect(p.b_hho, {h}, "b_hho");
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_product(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_product(shape_)) {
    throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_string(shape_));
  }
}

Tensor Tensor::reshaped(std::vector<std::size_t> shape) const {
  if (shape_product(shape) != data_.size()) {
    throw DimensionError("cannot reshape " + std::to_string(data_.size()) + " values into " +
                         shape_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::size_t Tensor::offset_of(std::initializer_list<std::size_t> idx) const {
  if (idx.size() != shape_.size()) {
    throw DimensionError("index rank " + std::to_string(idx.size()) +
                         " does not match tensor rank " + std::to_string(shape_.size()));
  }
  std::size_t off = 0;
  std::size_t d = 0;
  for (std::size_t i : idx) {
    if (i >= shape_[d]) {
      throw DimensionError("index " + std::to_string(i) + " out of range for dimension " +
                           std::to_string(d) + " of " + shape_string(shape_));
    }
    off = off * shape_[d] + i;
    ++d;
  }
  return off;
}

std::string Tensor::shape_string(const std::vector<std::size_t>& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

// --------------------------------------------------------------------------
// conv2d

Tensor conv2d_batch(const Tensor& input, const Tensor& weights, const Tensor& bias,
                    Stride2d stride, Padding2d pad) {
  check_conv_batch_args(input, weights, bias, false);
  const std::size_t B = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  const std::size_t F = weights.dim(0), kH = weights.dim(2), kW = weights.dim(3);
  const std::size_t Hp = conv_out_extent(H, pad.h, kH, stride.h, "height");
  const std::size_t Wp = conv_out_extent(W, pad.w, kW, stride.w, "width");
  const std::size_t P = Hp * Wp;
  const std::size_t K = C * kH * kW;

  RowMat cols(K, B * P);
  for (std::size_t b = 0; b < B; ++b) {
    im2col(input.data() + b * C * H * W, C, H, W, kH, kW, stride, pad, Hp, Wp, cols.data(),
           B * P, b * P);
  }
  MapConstMat wmat(weights.data(), static_cast<Eigen::Index>(F), static_cast<Eigen::Index>(K));
  RowMat prod = wmat * cols;  // [F, B*P]

  Tensor out({B, F, Hp, Wp});
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t f = 0; f < F; ++f) {
      const double bf = bias.data()[f];
      const double* src = prod.data() + f * (B * P) + b * P;
      double* dst = out.data() + (b * F + f) * P;
      for (std::size_t i = 0; i < P; ++i) dst[i] = src[i] + bf;
    }
  }
  return out;
}

void conv2d_batch_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_out,
                           Stride2d stride, Padding2d pad, Tensor& grad_input,
                           Tensor& grad_weights, Tensor& grad_bias) {
  const std::size_t B = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  const std::size_t F = weights.dim(0), kH = weights.dim(2), kW = weights.dim(3);
  const std::size_t Hp = grad_out.dim(2), Wp = grad_out.dim(3);
  const std::size_t P = Hp * Wp;
  const std::size_t K = C * kH * kW;

  // Gather grad_out as [F, B*P].
  RowMat gout(F, B * P);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t f = 0; f < F; ++f) {
      std::memcpy(gout.data() + f * (B * P) + b * P, grad_out.data() + (b * F + f) * P,
                  P * sizeof(double));
    }
  }

  RowMat cols(K, B * P);
  for (std::size_t b = 0; b < B; ++b) {
    im2col(input.data() + b * C * H * W, C, H, W, kH, kW, stride, pad, Hp, Wp, cols.data(),
           B * P, b * P);
  }

  grad_weights = Tensor({F, C, kH, kW});
  MapMat gw(grad_weights.data(), static_cast<Eigen::Index>(F), static_cast<Eigen::Index>(K));
  gw.noalias() = gout * cols.transpose();

  // Scalar bias reduction keeps results independent of buffer alignment
  // (vectorized reductions peel differently per allocation).
  grad_bias = Tensor({F});
  for (std::size_t f = 0; f < F; ++f) {
    double acc = 0.0;
    const double* row = gout.data() + f * (B * P);
    for (std::size_t i = 0; i < B * P; ++i) acc += row[i];
    grad_bias.data()[f] = acc;
  }

  MapConstMat wmat(weights.data(), static_cast<Eigen::Index>(F), static_cast<Eigen::Index>(K));
  RowMat dcols = wmat.transpose() * gout;  // [K, B*P]

  grad_input = Tensor({B, C, H, W});
  for (std::size_t b = 0; b < B; ++b) {
    col2im(dcols.data(), B * P, b * P, C, H, W, kH, kW, stride, pad, Hp, Wp,
           grad_input.data() + b * C * H * W);
  }
}

// --------------------------------------------------------------------------
// conv_transpose2d

Tensor conv_transpose2d_batch(const Tensor& input, const Tensor& weights, const Tensor& bias,
                              Stride2d stride, Padding2d pad, OutputPadding2d out_pad) {
  check_conv_batch_args(input, weights, bias, true);
  if (out_pad.h >= stride.h || out_pad.w >= stride.w) {
    throw DimensionError("output padding must be smaller than the stride");
  }
  const std::size_t B = input.dim(0), Ci = input.dim(1), H = input.dim(2), W = input.dim(3);
  const std::size_t Co = weights.dim(1), kH = weights.dim(2), kW = weights.dim(3);
  const std::size_t Ho = (H - 1) * stride.h + kH + out_pad.h;
  const std::size_t Wo = (W - 1) * stride.w + kW + out_pad.w;
  if (Ho < 2 * pad.h + 1 || Wo < 2 * pad.w + 1) {
    throw DimensionError("padding larger than the produced image");
  }
  const std::size_t Hout = Ho - 2 * pad.h;
  const std::size_t Wout = Wo - 2 * pad.w;
  const std::size_t P = H * W;
  const std::size_t K = Co * kH * kW;

  // Gather input as [Ci, B*P].
  RowMat in_mat(Ci, B * P);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t c = 0; c < Ci; ++c) {
      std::memcpy(in_mat.data() + c * (B * P) + b * P, input.data() + (b * Ci + c) * P,
                  P * sizeof(double));
    }
  }
  MapConstMat wmat(weights.data(), static_cast<Eigen::Index>(Ci), static_cast<Eigen::Index>(K));
  RowMat cols = wmat.transpose() * in_mat;  // [K, B*P]

  Tensor out({B, Co, Hout, Wout});
  for (std::size_t b = 0; b < B; ++b) {
    col2im(cols.data(), B * P, b * P, Co, Hout, Wout, kH, kW, stride, pad, H, W,
           out.data() + b * Co * Hout * Wout);
  }
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t c = 0; c < Co; ++c) {
      const double bc = bias.data()[c];
      double* dst = out.data() + (b * Co + c) * Hout * Wout;
      for (std::size_t i = 0; i < Hout * Wout; ++i) dst[i] += bc;
    }
  }
  return out;
}

void conv_transpose2d_batch_backward(const Tensor& input, const Tensor& weights,
                                     const Tensor& grad_out, Stride2d stride, Padding2d pad,
                                     OutputPadding2d out_pad, Tensor& grad_input,
                                     Tensor& grad_weights, Tensor& grad_bias) {
  const std::size_t B = input.dim(0), Ci = input.dim(1), H = input.dim(2), W = input.dim(3);
  const std::size_t Co = weights.dim(1), kH = weights.dim(2), kW = weights.dim(3);
  const std::size_t Hout = grad_out.dim(2), Wout = grad_out.dim(3);
  const std::size_t P = H * W;
  const std::size_t K = Co * kH * kW;
  (void)out_pad;

  // dcols: patches of grad_out under the shared geometry, [K, B*P].
  RowMat dcols(K, B * P);
  for (std::size_t b = 0; b < B; ++b) {
    im2col(grad_out.data() + b * Co * Hout * Wout, Co, Hout, Wout, kH, kW, stride, pad, H, W,
           dcols.data(), B * P, b * P);
  }

  RowMat in_mat(Ci, B * P);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t c = 0; c < Ci; ++c) {
      std::memcpy(in_mat.data() + c * (B * P) + b * P, input.data() + (b * Ci + c) * P,
                  P * sizeof(double));
    }
  }

  grad_weights = Tensor({Ci, Co, kH, kW});
  MapMat gw(grad_weights.data(), static_cast<Eigen::Index>(Ci), static_cast<Eigen::Index>(K));
  gw.noalias() = in_mat * dcols.transpose();

  grad_bias = Tensor({Co});
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t c = 0; c < Co; ++c) {
      const double* src = grad_out.data() + (b * Co + c) * Hout * Wout;
      double acc = 0.0;
      for (std::size_t i = 0; i < Hout * Wout; ++i) acc += src[i];
      grad_bias.data()[c] += acc;
    }
  }

  MapConstMat wmat(weights.data(), static_cast<Eigen::Index>(Ci), static_cast<Eigen::Index>(K));
  RowMat din = wmat * dcols;  // [Ci, B*P]
  grad_input = Tensor({B, Ci, H, W});
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t c = 0; c < Ci; ++c) {
      std::memcpy(grad_input.data() + (b * Ci + c) * P, din.data() + c * (B * P) + b * P,
                  P * sizeof(double));
    }
  }
}

// --------------------------------------------------------------------------
// linear

Tensor linear_batch(const Tensor& input, const Tensor& weights, const Tensor& bias) {
  if (input.rank() != 2) shape_error("linear input must be [B,n]", input);
  if (weights.rank() != 2) shape_error("linear weights must be [m,n]", weights);
  if (bias.rank() != 1 || bias.dim(0) != weights.dim(0)) {
    throw DimensionError("linear bias length must equal the output width");
  }
  if (input.dim(1) != weights.dim(1)) {
    throw DimensionError("linear expects input width " + std::to_string(weights.dim(1)) +
                         ", got " + std::to_string(input.dim(1)));
  }
  const auto B = static_cast<Eigen::Index>(input.dim(0));
  const auto n = static_cast<Eigen::Index>(input.dim(1));
  const auto m = static_cast<Eigen::Index>(weights.dim(0));
  Tensor out({input.dim(0), weights.dim(0)});
  MapConstMat x(input.data(), B, n);
  MapConstMat w(weights.data(), m, n);
  MapConstVec b(bias.data(), m);
  MapMat y(out.data(), B, m);
  y.noalias() = x * w.transpose();
  y.rowwise() += b.transpose();
  return out;
}

void linear_batch_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_out,
                           Tensor& grad_input, Tensor& grad_weights, Tensor& grad_bias) {
  const auto B = static_cast<Eigen::Index>(input.dim(0));
  const auto n = static_cast<Eigen::Index>(input.dim(1));
  const auto m = static_cast<Eigen::Index>(weights.dim(0));
  MapConstMat x(input.data(), B, n);
  MapConstMat w(weights.data(), m, n);
  MapConstMat gy(grad_out.data(), B, m);

  grad_input = Tensor(input.shape());
  MapMat gx(grad_input.data(), B, n);
  gx.noalias() = gy * w;

  grad_weights = Tensor(weights.shape());
  MapMat gw(grad_weights.data(), m, n);
  gw.noalias() = gy.transpose() * x;

  // Scalar column sums for alignment-independent determinism.
  grad_bias = Tensor({weights.dim(0)});
  for (Eigen::Index j = 0; j < m; ++j) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < B; ++i) acc += gy(i, j);
    grad_bias.data()[j] = acc;
  }
}

// --------------------------------------------------------------------------
// single-sample wrappers

Tensor conv2d(const Tensor& input, const Tensor& weights, const Tensor& bias, Stride2d stride,
              Padding2d pad) {
  if (input.rank() != 3) shape_error("conv2d input must be [C,H,W]", input);
  return squeeze0(conv2d_batch(unsqueeze0(input), weights, bias, stride, pad));
}

Tensor conv_transpose2d(const Tensor& input, const Tensor& weights, const Tensor& bias,
                        Stride2d stride, Padding2d pad, OutputPadding2d out_pad) {
  if (input.rank() != 3) shape_error("conv_transpose2d input must be [C,H,W]", input);
  return squeeze0(
      conv_transpose2d_batch(unsqueeze0(input), weights, bias, stride, pad, out_pad));
}

Tensor linear(const Tensor& input, const Tensor& weights, const Tensor& bias) {
  if (input.rank() != 1) shape_error("linear input must be [n]", input);
  return squeeze0(linear_batch(unsqueeze0(input), weights, bias));
}

// --------------------------------------------------------------------------
// activations and loss

namespace {
template <class F>
Tensor elementwise(const Tensor& x, F f) {
  Tensor y(x.shape());
  const double* in = x.data();
  double* out = y.data();
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(in[i]);
  return y;
}
}  // namespace

Tensor relu(const Tensor& x) {
  return elementwise(x, [](double v) { return v > 0.0 ? v : 0.0; });
}
Tensor relu_grad(const Tensor& x) {
  return elementwise(x, [](double v) { return v > 0.0 ? 1.0 : 0.0; });
}
Tensor sigmoid(const Tensor& x) {
  return elementwise(x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}
Tensor sigmoid_grad(const Tensor& x) {
  return elementwise(x, [](double v) {
    const double s = 1.0 / (1.0 + std::exp(-v));
    return s * (1.0 - s);
  });
}
Tensor tanh_act(const Tensor& x) {
  return elementwise(x, [](double v) { return std::tanh(v); });
}
Tensor tanh_grad(const Tensor& x) {
  return elementwise(x, [](double v) {
    const double t = std::tanh(v);
    return 1.0 - t * t;
  });
}

double mse_loss(const Tensor& prediction, const Tensor& target) {
  if (!prediction.same_shape(target)) {
    throw DimensionError("mse_loss shapes differ: " + Tensor::shape_string(prediction.shape()) +
                         " vs " + Tensor::shape_string(target.shape()));
  }
  if (prediction.size() == 0) {
    throw InvalidArgumentError("mse_loss over an empty tensor is undefined");
  }
  double acc = 0.0;
  const double* a = prediction.data();
  const double* b = target.data();
  for (std::size_t i = 0; i < prediction.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc / static_cast<double>(prediction.size());
}

Tensor mse_loss_grad(const Tensor& prediction, const Tensor& target) {
  if (!prediction.same_shape(target)) {
    throw DimensionError("mse_loss shapes differ");
  }
  const double scale = 2.0 / static_cast<double>(prediction.size());
  Tensor g(prediction.shape());
  const double* a = prediction.data();
  const double* b = target.data();
  double* out = g.data();
  for (std::size_t i = 0; i < prediction.size(); ++i) out[i] = scale * (a[i] - b[i]);
  return g;
}

// --------------------------------------------------------------------------
// LSTM reference cell

std::pair<Tensor, Tensor> lstm_cell(const Tensor& x_t, const Tensor& h_prev,
                                    const Tensor& c_prev, const LstmCellParams& params) {
  check_cell_params(params);
  const std::size_t h = params.hidden();
  const std::size_t d = params.input();
  if (x_t.shape() != std::vector<std::size_t>{d}) shape_error("x_t must be [input]", x_t);
  if (h_prev.shape() != std::vector<std::size_t>{h}) shape_error("h_prev must be [hidden]", h_prev);
  if (c_prev.shape() != std::vector<std::size_t>{h}) shape_error("c_prev must be [hidden]", c_prev);

  const auto hd = static_cast<Eigen::Index>(h);
  const auto dd = static_cast<Eigen::Index>(d);
  MapConstVec x(x_t.data(), dd), hp(h_prev.data(), hd), cp(c_prev.data(), hd);
  auto gate = [&](const Tensor& Wx, const Tensor& Wh, const Tensor& bih, const Tensor& bhh) {
    MapConstMat wx(Wx.data(), hd, dd);
    MapConstMat wh(Wh.data(), hd, hd);
    MapConstVec bi(bih.data(), hd), bh(bhh.data(), hd);
    return (wx * x + wh * hp + bi + bh).eval();
  };
  const Eigen::VectorXd zi = gate(params.W_xi, params.W_hi, params.b_ihi, params.b_hhi);
  const Eigen::VectorXd zf = gate(params.W_xf, params.W_hf, params.b_ihf, params.b_hhf);
  const Eigen::VectorXd za = gate(params.W_xa, params.W_ha, params.b_iha, params.b_hha);
  const Eigen::VectorXd zo = gate(params.W_xo, params.W_ho, params.b_iho, params.b_hho);

  Tensor h_t({h}), c_t({h});
  for (std::size_t k = 0; k < h; ++k) {
    const double ik = 1.0 / (1.0 + std::exp(-zi[static_cast<Eigen::Index>(k)]));
    const double fk = 1.0 / (1.0 + std::exp(-zf[static_cast<Eigen::Index>(k)]));
    const double ak = std::tanh(za[static_cast<Eigen::Index>(k)]);
    const double ok = 1.0 / (1.0 + std::exp(-zo[static_cast<Eigen::Index>(k)]));
    const double ck = fk * cp[static_cast<Eigen::Index>(k)] + ik * ak;
    c_t.data()[k] = ck;
    h_t.data()[k] = ok * std::tanh(ck);
  }
  return {std::move(h_t), std::move(c_t)};
}

Tensor lstm_sequence(const Tensor& inputs, const LstmCellParams& params, bool return_all) {
  if (inputs.rank() != 2) shape_error("lstm_sequence input must be [T,d]", inputs);
  const std::size_t T = inputs.dim(0);
  const std::size_t d = inputs.dim(1);
  if (T == 0) throw InvalidArgumentError("lstm_sequence needs at least one timestep");
  if (d != params.input()) {
    throw DimensionError("lstm_sequence input width " + std::to_string(d) +
                         " does not match cell input " + std::to_string(params.input()));
  }
  const std::size_t h = params.hidden();
  Tensor h_t({h}), c_t({h});
  Tensor all({T, h});
  for (std::size_t t = 0; t < T; ++t) {
    Tensor x_t({d});
    std::memcpy(x_t.data(), inputs.data() + t * d, d * sizeof(double));
    auto [h_next, c_next] = lstm_cell(x_t, h_t, c_t, params);
    h_t = std::move(h_next);
    c_t = std::move(c_next);
    std::memcpy(all.data() + t * h, h_t.data(), h * sizeof(double));
  }
  return return_all ? all : h_t;
}

}  // namespace avtpids
