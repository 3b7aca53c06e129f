#include "avtpids/layers.hpp"

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

[[noreturn]] void no_cache(const std::string& who) {
  throw StateError(who + ": backward called without a preceding training forward pass");
}

void accumulate(Tensor& into, const Tensor& grad) {
  for (std::size_t i = 0; i < into.size(); ++i) into.data()[i] += grad.data()[i];
}

Parameter make_param(std::string id, std::vector<std::size_t> shape) {
  Parameter p;
  p.id = std::move(id);
  p.value = Tensor(shape);
  p.grad = Tensor(std::move(shape));
  return p;
}

std::string dims2(std::size_t a, std::size_t b) {
  return std::to_string(a) + "x" + std::to_string(b);
}

std::size_t item_size(const Tensor& t) {
  std::size_t n = 1;
  for (std::size_t i = 1; i < t.rank(); ++i) n *= t.dim(i);
  return n;
}

}  // namespace

void uniform_fill(Tensor& t, double bound, std::mt19937_64& rng) {
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;  // [0,1)
    t.data()[i] = (2.0 * u - 1.0) * bound;
  }
}

// ---------------------------------------------------------------------------
// Conv2d

Conv2dLayer::Conv2dLayer(std::size_t in_channels, std::size_t out_channels, std::size_t kernel_h,
                         std::size_t kernel_w, Stride2d stride, Padding2d pad)
    : in_channels_(in_channels),
      out_channels_(out_channels),
      kernel_h_(kernel_h),
      kernel_w_(kernel_w),
      stride_(stride),
      pad_(pad),
      weight_(make_param("weight", {out_channels, in_channels, kernel_h, kernel_w})),
      bias_(make_param("bias", {out_channels})) {}

Tensor Conv2dLayer::forward(const Tensor& input, bool training) {
  Tensor out = conv2d_batch(input, weight_.value, bias_.value, stride_, pad_);
  if (training) {
    cached_input_ = input;
    has_cache_ = true;
  }
  return out;
}

Tensor Conv2dLayer::backward(const Tensor& grad_output) {
  if (!has_cache_) no_cache(describe());
  Tensor gx, gw, gb;
  conv2d_batch_backward(cached_input_, weight_.value, grad_output, stride_, pad_, gx, gw, gb);
  accumulate(weight_.grad, gw);
  accumulate(bias_.grad, gb);
  has_cache_ = false;
  return gx;
}

std::vector<Parameter*> Conv2dLayer::params() { return {&weight_, &bias_}; }

std::string Conv2dLayer::describe() const {
  return "conv2d(in=" + std::to_string(in_channels_) + ",out=" + std::to_string(out_channels_) +
         ",kernel=" + dims2(kernel_h_, kernel_w_) + ",stride=" + dims2(stride_.h, stride_.w) +
         ",pad=" + dims2(pad_.h, pad_.w) + ")";
}

void Conv2dLayer::init_params(std::mt19937_64& rng) {
  const double bound =
      1.0 / std::sqrt(static_cast<double>(in_channels_ * kernel_h_ * kernel_w_));
  uniform_fill(weight_.value, bound, rng);
  uniform_fill(bias_.value, bound, rng);
}

// ---------------------------------------------------------------------------
// ConvTranspose2d

ConvTranspose2dLayer::ConvTranspose2dLayer(std::size_t in_channels, std::size_t out_channels,
                                           std::size_t kernel_h, std::size_t kernel_w,
                                           Stride2d stride, Padding2d pad,
                                           OutputPadding2d out_pad)
    : in_channels_(in_channels),
      out_channels_(out_channels),
      kernel_h_(kernel_h),
      kernel_w_(kernel_w),
      stride_(stride),
      pad_(pad),
      out_pad_(out_pad),
      weight_(make_param("weight", {in_channels, out_channels, kernel_h, kernel_w})),
      bias_(make_param("bias", {out_channels})) {}

Tensor ConvTranspose2dLayer::forward(const Tensor& input, bool training) {
  Tensor out =
      conv_transpose2d_batch(input, weight_.value, bias_.value, stride_, pad_, out_pad_);
  if (training) {
    cached_input_ = input;
    has_cache_ = true;
  }
  return out;
}

Tensor ConvTranspose2dLayer::backward(const Tensor& grad_output) {
  if (!has_cache_) no_cache(describe());
  Tensor gx, gw, gb;
  conv_transpose2d_batch_backward(cached_input_, weight_.value, grad_output, stride_, pad_,
                                  out_pad_, gx, gw, gb);
  accumulate(weight_.grad, gw);
  accumulate(bias_.grad, gb);
  has_cache_ = false;
  return gx;
}

std::vector<Parameter*> ConvTranspose2dLayer::params() { return {&weight_, &bias_}; }

std::string ConvTranspose2dLayer::describe() const {
  return "conv_transpose2d(in=" + std::to_string(in_channels_) +
         ",out=" + std::to_string(out_channels_) + ",kernel=" + dims2(kernel_h_, kernel_w_) +
         ",stride=" + dims2(stride_.h, stride_.w) + ",pad=" + dims2(pad_.h, pad_.w) +
         ",outpad=" + dims2(out_pad_.h, out_pad_.w) + ")";
}

void ConvTranspose2dLayer::init_params(std::mt19937_64& rng) {
  const double bound =
      1.0 / std::sqrt(static_cast<double>(in_channels_ * kernel_h_ * kernel_w_));
  uniform_fill(weight_.value, bound, rng);
  uniform_fill(bias_.value, bound, rng);
}

// ---------------------------------------------------------------------------
// Linear

LinearLayer::LinearLayer(std::size_t in_features, std::size_t out_features)
    : in_features_(in_features),
      out_features_(out_features),
      weight_(make_param("weight", {out_features, in_features})),
      bias_(make_param("bias", {out_features})) {}

Tensor LinearLayer::forward(const Tensor& input, bool training) {
  Tensor out = linear_batch(input, weight_.value, bias_.value);
  if (training) {
    cached_input_ = input;
    has_cache_ = true;
  }
  return out;
}

Tensor LinearLayer::backward(const Tensor& grad_output) {
  if (!has_cache_) no_cache(describe());
  Tensor gx, gw, gb;
  linear_batch_backward(cached_input_, weight_.value, grad_output, gx, gw, gb);
  accumulate(weight_.grad, gw);
  accumulate(bias_.grad, gb);
  has_cache_ = false;
  return gx;
}

std::vector<Parameter*> LinearLayer::params() { return {&weight_, &bias_}; }

std::string LinearLayer::describe() const {
  return "linear(in=" + std::to_string(in_features_) + ",out=" + std::to_string(out_features_) +
         ")";
}

void LinearLayer::init_params(std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_features_));
  uniform_fill(weight_.value, bound, rng);
  uniform_fill(bias_.value, bound, rng);
}

// ---------------------------------------------------------------------------
// TimeDistributedLinear

TimeDistributedLinearLayer::TimeDistributedLinearLayer(std::size_t in_features,
                                                       std::size_t out_features)
    : in_features_(in_features),
      out_features_(out_features),
      weight_(make_param("weight", {out_features, in_features})),
      bias_(make_param("bias", {out_features})) {}

Tensor TimeDistributedLinearLayer::forward(const Tensor& input, bool training) {
  if (input.rank() != 3 || input.dim(2) != in_features_) {
    throw DimensionError(describe() + " expects input [B,T," + std::to_string(in_features_) +
                         "], got " + Tensor::shape_string(input.shape()));
  }
  const std::size_t B = input.dim(0), T = input.dim(1);
  Tensor flat = input.reshaped({B * T, in_features_});
  Tensor out = linear_batch(flat, weight_.value, bias_.value);
  if (training) {
    cached_input_ = input;
    has_cache_ = true;
  }
  return out.reshaped({B, T, out_features_});
}

Tensor TimeDistributedLinearLayer::backward(const Tensor& grad_output) {
  if (!has_cache_) no_cache(describe());
  const std::size_t B = cached_input_.dim(0), T = cached_input_.dim(1);
  Tensor flat_in = cached_input_.reshaped({B * T, in_features_});
  Tensor flat_g = grad_output.reshaped({B * T, out_features_});
  Tensor gx, gw, gb;
  linear_batch_backward(flat_in, weight_.value, flat_g, gx, gw, gb);
  accumulate(weight_.grad, gw);
  accumulate(bias_.grad, gb);
  has_cache_ = false;
  return gx.reshaped({B, T, in_features_});
}

std::vector<Parameter*> TimeDistributedLinearLayer::params() { return {&weight_, &bias_}; }

std::string TimeDistributedLinearLayer::describe() const {
  return "time_distributed_linear(in=" + std::to_string(in_features_) +
         ",out=" + std::to_string(out_features_) + ")";
}

void TimeDistributedLinearLayer::init_params(std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_features_));
  uniform_fill(weight_.value, bound, rng);
  uniform_fill(bias_.value, bound, rng);
}

// ---------------------------------------------------------------------------
// ReLU

Tensor ReluLayer::forward(const Tensor& input, bool training) {
  if (training) {
    cached_input_ = input;
    has_cache_ = true;
  }
  return relu(input);
}

Tensor ReluLayer::backward(const Tensor& grad_output) {
  if (!has_cache_) no_cache(describe());
  Tensor g(grad_output.shape());
  for (std::size_t i = 0; i < g.size(); ++i) {
    g.data()[i] = cached_input_.data()[i] > 0.0 ? grad_output.data()[i] : 0.0;
  }
  has_cache_ = false;
  return g;
}

std::string ReluLayer::describe() const { return "relu()"; }

// ---------------------------------------------------------------------------
// Reshape / Flatten

ReshapeLayer::ReshapeLayer(std::vector<std::size_t> item_shape)
    : item_shape_(std::move(item_shape)) {}

Tensor ReshapeLayer::forward(const Tensor& input, bool training) {
  const std::size_t want =
      std::accumulate(item_shape_.begin(), item_shape_.end(), std::size_t{1},
                      [](std::size_t a, std::size_t b) { return a * b; });
  if (input.rank() == 0 || item_size(input) != want) {
    throw DimensionError(describe() + " cannot reshape items of " +
                         Tensor::shape_string(input.shape()));
  }
  std::vector<std::size_t> out_shape{input.dim(0)};
  out_shape.insert(out_shape.end(), item_shape_.begin(), item_shape_.end());
  if (training) {
    cached_in_shape_ = input.shape();
    has_cache_ = true;
  }
  return input.reshaped(std::move(out_shape));
}

Tensor ReshapeLayer::backward(const Tensor& grad_output) {
  if (!has_cache_) no_cache(describe());
  has_cache_ = false;
  return grad_output.reshaped(cached_in_shape_);
}

std::string ReshapeLayer::describe() const {
  std::string s = "reshape(";
  for (std::size_t i = 0; i < item_shape_.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(item_shape_[i]);
  }
  return s + ")";
}

Tensor FlattenLayer::forward(const Tensor& input, bool training) {
  if (input.rank() < 2) {
    throw DimensionError("flatten expects a batched tensor, got " +
                         Tensor::shape_string(input.shape()));
  }
  if (training) {
    cached_in_shape_ = input.shape();
    has_cache_ = true;
  }
  return input.reshaped({input.dim(0), item_size(input)});
}

Tensor FlattenLayer::backward(const Tensor& grad_output) {
  if (!has_cache_) no_cache(describe());
  has_cache_ = false;
  return grad_output.reshaped(cached_in_shape_);
}

std::string FlattenLayer::describe() const { return "flatten()"; }

// ---------------------------------------------------------------------------
// Repeat

RepeatLayer::RepeatLayer(std::size_t times) : times_(times) {
  if (times_ == 0) throw InvalidArgumentError("repeat count must be positive");
}

Tensor RepeatLayer::forward(const Tensor& input, bool training) {
  if (input.rank() != 2) {
    throw DimensionError("repeat expects [B,h], got " + Tensor::shape_string(input.shape()));
  }
  const std::size_t B = input.dim(0), h = input.dim(1);
  Tensor out({B, times_, h});
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t t = 0; t < times_; ++t) {
      std::memcpy(out.data() + (b * times_ + t) * h, input.data() + b * h, h * sizeof(double));
    }
  }
  if (training) {
    cached_in_shape_ = input.shape();
    has_cache_ = true;
  }
  return out;
}

Tensor RepeatLayer::backward(const Tensor& grad_output) {
  if (!has_cache_) no_cache(describe());
  const std::size_t B = cached_in_shape_[0], h = cached_in_shape_[1];
  Tensor g({B, h});
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t t = 0; t < times_; ++t) {
      const double* src = grad_output.data() + (b * times_ + t) * h;
      double* dst = g.data() + b * h;
      for (std::size_t i = 0; i < h; ++i) dst[i] += src[i];
    }
  }
  has_cache_ = false;
  return g;
}

std::string RepeatLayer::describe() const { return "repeat(" + std::to_string(times_) + ")"; }

// ---------------------------------------------------------------------------
// LSTM

LstmLayer::LstmLayer(std::size_t input_size, std::size_t hidden_size, bool return_all)
    : input_(input_size),
      hidden_(hidden_size),
      return_all_(return_all),
      w_ih_(make_param("w_ih", {4 * hidden_size, input_size})),
      w_hh_(make_param("w_hh", {4 * hidden_size, hidden_size})),
      b_ih_(make_param("b_ih", {4 * hidden_size})),
      b_hh_(make_param("b_hh", {4 * hidden_size})) {
  if (input_ == 0 || hidden_ == 0) {
    throw InvalidArgumentError("LSTM sizes must be positive");
  }
}

Tensor LstmLayer::forward(const Tensor& input, bool training) {
  if (input.rank() != 3 || input.dim(2) != input_) {
    throw DimensionError(describe() + " expects input [B,T," + std::to_string(input_) +
                         "], got " + Tensor::shape_string(input.shape()));
  }
  const std::size_t B = input.dim(0), T = input.dim(1);
  if (T == 0) throw InvalidArgumentError("LSTM sequence must contain at least one timestep");
  const std::size_t h = hidden_;
  const auto hb = static_cast<Eigen::Index>(h);

  MapConstMat x2(input.data(), static_cast<Eigen::Index>(B * T),
                 static_cast<Eigen::Index>(input_));
  MapConstMat wih(w_ih_.value.data(), static_cast<Eigen::Index>(4 * h),
                  static_cast<Eigen::Index>(input_));
  MapConstMat whh(w_hh_.value.data(), static_cast<Eigen::Index>(4 * h), hb);
  MapConstVec bih(b_ih_.value.data(), static_cast<Eigen::Index>(4 * h));
  MapConstVec bhh(b_hh_.value.data(), static_cast<Eigen::Index>(4 * h));

  RowMat xw = x2 * wih.transpose();  // [B*T, 4h]
  RowMat H = RowMat::Zero(static_cast<Eigen::Index>(B), hb);
  RowMat C = RowMat::Zero(static_cast<Eigen::Index>(B), hb);
  const Eigen::RowVectorXd bias_row = (bih + bhh).transpose();

  if (training) {
    cached_input_ = input;
    gates_.assign(T, Tensor());
    cells_.assign(T, Tensor());
    hiddens_.assign(T + 1, Tensor());
    hiddens_[0] = Tensor({B, h});  // h_0 = 0
  }

  Tensor out = return_all_ ? Tensor({B, T, h}) : Tensor({B, h});
  for (std::size_t t = 0; t < T; ++t) {
    RowMat z(static_cast<Eigen::Index>(B), static_cast<Eigen::Index>(4 * h));
    for (std::size_t b = 0; b < B; ++b) {
      z.row(static_cast<Eigen::Index>(b)) = xw.row(static_cast<Eigen::Index>(b * T + t));
    }
    z.noalias() += H * whh.transpose();
    z.rowwise() += bias_row;

    // Gate order along the packed axis: input, forget, candidate, output.
    auto zi = z.middleCols(0, hb);
    auto zf = z.middleCols(hb, hb);
    auto za = z.middleCols(2 * hb, hb);
    auto zo = z.middleCols(3 * hb, hb);
    RowMat gi = zi.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
    RowMat gf = zf.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
    RowMat ga = za.unaryExpr([](double v) { return std::tanh(v); });
    RowMat go = zo.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });

    C = (gf.array() * C.array() + gi.array() * ga.array()).matrix();
    H = (go.array() * C.array().tanh()).matrix();

    if (training) {
      Tensor gate_t({B, 4 * h});
      MapMat gm(gate_t.data(), static_cast<Eigen::Index>(B), static_cast<Eigen::Index>(4 * h));
      gm.middleCols(0, hb) = gi;
      gm.middleCols(hb, hb) = gf;
      gm.middleCols(2 * hb, hb) = ga;
      gm.middleCols(3 * hb, hb) = go;
      gates_[t] = std::move(gate_t);
      Tensor ct({B, h});
      MapMat(ct.data(), static_cast<Eigen::Index>(B), hb) = C;
      cells_[t] = std::move(ct);
      Tensor ht({B, h});
      MapMat(ht.data(), static_cast<Eigen::Index>(B), hb) = H;
      hiddens_[t + 1] = std::move(ht);
    }
    if (return_all_) {
      for (std::size_t b = 0; b < B; ++b) {
        std::memcpy(out.data() + (b * T + t) * h, H.data() + b * h, h * sizeof(double));
      }
    }
  }
  if (!return_all_) {
    std::memcpy(out.data(), H.data(), B * h * sizeof(double));
  }
  has_cache_ = training;
  return out;
}

Tensor LstmLayer::backward(const Tensor& grad_output) {
  if (!has_cache_) no_cache(describe());
  const std::size_t B = cached_input_.dim(0), T = cached_input_.dim(1);
  const std::size_t h = hidden_;
  const auto hb = static_cast<Eigen::Index>(h);
  const auto Bb = static_cast<Eigen::Index>(B);

  MapConstMat whh(w_hh_.value.data(), static_cast<Eigen::Index>(4 * h), hb);
  MapConstMat wih(w_ih_.value.data(), static_cast<Eigen::Index>(4 * h),
                  static_cast<Eigen::Index>(input_));
  MapMat gwhh(w_hh_.grad.data(), static_cast<Eigen::Index>(4 * h), hb);

  RowMat dH = RowMat::Zero(Bb, hb);
  RowMat dC = RowMat::Zero(Bb, hb);
  RowMat dxw = RowMat::Zero(static_cast<Eigen::Index>(B * T),
                            static_cast<Eigen::Index>(4 * h));

  for (std::size_t tt = T; tt-- > 0;) {
    if (return_all_) {
      for (std::size_t b = 0; b < B; ++b) {
        dH.row(static_cast<Eigen::Index>(b)) +=
            MapConstVec(grad_output.data() + (b * T + tt) * h, hb).transpose();
      }
    } else if (tt == T - 1) {
      dH += MapConstMat(grad_output.data(), Bb, hb);
    }

    MapConstMat gates(gates_[tt].data(), Bb, static_cast<Eigen::Index>(4 * h));
    auto gi = gates.middleCols(0, hb);
    auto gf = gates.middleCols(hb, hb);
    auto ga = gates.middleCols(2 * hb, hb);
    auto go = gates.middleCols(3 * hb, hb);
    MapConstMat ct(cells_[tt].data(), Bb, hb);
    RowMat tc = ct.array().tanh().matrix();

    RowMat dzo =
        (dH.array() * tc.array() * go.array() * (1.0 - go.array())).matrix();
    dC.array() += dH.array() * go.array() * (1.0 - tc.array().square());

    RowMat dzi = (dC.array() * ga.array() * gi.array() * (1.0 - gi.array())).matrix();
    RowMat dza = (dC.array() * gi.array() * (1.0 - ga.array().square())).matrix();
    RowMat dzf(Bb, hb);
    if (tt > 0) {
      MapConstMat cprev(cells_[tt - 1].data(), Bb, hb);
      dzf = (dC.array() * cprev.array() * gf.array() * (1.0 - gf.array())).matrix();
      dC = (dC.array() * gf.array()).matrix();
    } else {
      dzf.setZero();  // c_{-1} = 0
      dC.setZero();
    }

    RowMat dz(Bb, static_cast<Eigen::Index>(4 * h));
    dz.middleCols(0, hb) = dzi;
    dz.middleCols(hb, hb) = dzf;
    dz.middleCols(2 * hb, hb) = dza;
    dz.middleCols(3 * hb, hb) = dzo;

    for (std::size_t b = 0; b < B; ++b) {
      dxw.row(static_cast<Eigen::Index>(b * T + tt)) = dz.row(static_cast<Eigen::Index>(b));
    }
    MapConstMat hprev(hiddens_[tt].data(), Bb, hb);
    gwhh.noalias() += dz.transpose() * hprev;
    dH.noalias() = dz * whh;
  }

  // Scalar bias reduction: vectorized partial sums round differently
  // depending on buffer alignment, which would break run-to-run determinism.
  for (std::size_t j = 0; j < 4 * h; ++j) {
    double acc = 0.0;
    for (std::size_t r = 0; r < B * T; ++r) {
      acc += dxw(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j));
    }
    b_ih_.grad.data()[j] += acc;
    b_hh_.grad.data()[j] += acc;
  }

  MapConstMat x2(cached_input_.data(), static_cast<Eigen::Index>(B * T),
                 static_cast<Eigen::Index>(input_));
  MapMat gwih(w_ih_.grad.data(), static_cast<Eigen::Index>(4 * h),
              static_cast<Eigen::Index>(input_));
  gwih.noalias() += dxw.transpose() * x2;

  Tensor grad_in({B, T, input_});
  MapMat gx(grad_in.data(), static_cast<Eigen::Index>(B * T),
            static_cast<Eigen::Index>(input_));
  gx.noalias() = dxw * wih;

  has_cache_ = false;
  gates_.clear();
  cells_.clear();
  hiddens_.clear();
  return grad_in;
}

std::vector<Parameter*> LstmLayer::params() { return {&w_ih_, &w_hh_, &b_ih_, &b_hh_}; }

std::string LstmLayer::describe() const {
  return "lstm(in=" + std::to_string(input_) + ",hidden=" + std::to_string(hidden_) +
         ",return=" + (return_all_ ? "all" : "last") + ")";
}

void LstmLayer::init_params(std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_));
  uniform_fill(w_ih_.value, bound, rng);
  uniform_fill(w_hh_.value, bound, rng);
  uniform_fill(b_ih_.value, bound, rng);
  uniform_fill(b_hh_.value, bound, rng);
}

LstmCellParams LstmLayer::cell_params() const {
  const std::size_t h = hidden_, d = input_;
  LstmCellParams p;
  auto slice_mat = [&](const Tensor& packed, std::size_t gate, std::size_t cols) {
    Tensor out({h, cols});
    std::memcpy(out.data(), packed.data() + gate * h * cols, h * cols * sizeof(double));
    return out;
  };
  auto slice_vec = [&](const Tensor& packed, std::size_t gate) {
    Tensor out({h});
    std::memcpy(out.data(), packed.data() + gate * h, h * sizeof(double));
    return out;
  };
  p.W_xi = slice_mat(w_ih_.value, 0, d);
  p.W_xf = slice_mat(w_ih_.value, 1, d);
  p.W_xa = slice_mat(w_ih_.value, 2, d);
  p.W_xo = slice_mat(w_ih_.value, 3, d);
  p.W_hi = slice_mat(w_hh_.value, 0, h);
  p.W_hf = slice_mat(w_hh_.value, 1, h);
  p.W_ha = slice_mat(w_hh_.value, 2, h);
  p.W_ho = slice_mat(w_hh_.value, 3, h);
  p.b_ihi = slice_vec(b_ih_.value, 0);
  p.b_ihf = slice_vec(b_ih_.value, 1);
  p.b_iha = slice_vec(b_ih_.value, 2);
  p.b_iho = slice_vec(b_ih_.value, 3);
  p.b_hhi = slice_vec(b_hh_.value, 0);
  p.b_hhf = slice_vec(b_hh_.value, 1);
  p.b_hha = slice_vec(b_hh_.value, 2);
  p.b_hho = slice_vec(b_hh_.value, 3);
  return p;
}

// ---------------------------------------------------------------------------
// Sequential

Layer& Sequential::add(std::unique_ptr<Layer> layer) {
  const std::size_t idx = layers_.size();
  for (Parameter* p : layer->params()) {
    p->id = "L" + std::to_string(idx) + "." + p->id;
  }
  layers_.push_back(std::move(layer));
  return *layers_.back();
}

Tensor Sequential::forward(const Tensor& input, bool training) {
  Tensor x = input;
  for (auto& l : layers_) x = l->forward(x, training);
  forward_ran_ = training;
  return x;
}

Tensor Sequential::backward(const Tensor& grad_output) {
  if (!forward_ran_) {
    throw StateError("Sequential::backward called without a training forward pass");
  }
  Tensor g = grad_output;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
  forward_ran_ = false;
  return g;
}

std::vector<Parameter*> Sequential::params() {
  std::vector<Parameter*> out;
  for (auto& l : layers_) {
    auto ps = l->params();
    out.insert(out.end(), ps.begin(), ps.end());
  }
  return out;
}

std::size_t Sequential::param_count() {
  std::size_t n = 0;
  for (Parameter* p : params()) n += p->value.size();
  return n;
}

void Sequential::init_params(std::mt19937_64& rng) {
  for (auto& l : layers_) l->init_params(rng);
}

std::vector<std::vector<std::size_t>> Sequential::forward_shapes(const Tensor& input) {
  std::vector<std::vector<std::size_t>> shapes;
  Tensor x = input;
  for (auto& l : layers_) {
    x = l->forward(x, false);
    shapes.push_back(x.shape());
  }
  return shapes;
}

std::vector<std::string> Sequential::describe() const {
  std::vector<std::string> out;
  out.reserve(layers_.size());
  for (const auto& l : layers_) out.push_back(l->describe());
  return out;
}

}  // namespace avtpids
