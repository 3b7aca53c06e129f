#include "avtpids/optim.hpp"

#include <cmath>

#include "avtpids/errors.hpp"
#include "avtpids/layers.hpp"

namespace avtpids {

Adam::Adam(std::vector<Parameter*> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  if (lr_ <= 0.0) throw InvalidArgumentError("learning rate must be positive");
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (Parameter* p : params_) {
    if (!p->grad.same_shape(p->value)) {
      throw DimensionError("parameter " + p->id + " has mismatched gradient shape");
    }
    m_.emplace_back(p->value.shape());
    v_.emplace_back(p->value.shape());
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Parameter& p = *params_[k];
    double* value = p.value.data();
    double* grad = p.grad.data();
    double* m = m_[k].data();
    double* v = v_[k].data();
    const std::size_t n = p.value.size();
    for (std::size_t i = 0; i < n; ++i) {
      const double g = grad[i];
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      value[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
      grad[i] = 0.0;
    }
  }
}

void Adam::zero_grad() {
  for (Parameter* p : params_) p->grad.fill(0.0);
}

void Adam::restore(std::vector<Tensor> m, std::vector<Tensor> v, std::uint64_t t) {
  if (m.size() != params_.size() || v.size() != params_.size()) {
    throw DimensionError("optimizer state count does not match parameter count");
  }
  for (std::size_t k = 0; k < params_.size(); ++k) {
    if (!m[k].same_shape(params_[k]->value) || !v[k].same_shape(params_[k]->value)) {
      throw DimensionError("optimizer state shape mismatch for " + params_[k]->id);
    }
  }
  m_ = std::move(m);
  v_ = std::move(v);
  t_ = t;
}

GradCheckReport grad_check(Sequential& model, const Tensor& input, const Tensor& target,
                           double h, std::size_t stride) {
  if (stride == 0) throw InvalidArgumentError("grad_check stride must be positive");
  auto params = model.params();
  for (Parameter* p : params) p->grad.fill(0.0);

  Tensor out = model.forward(input, true);
  Tensor g = mse_loss_grad(out, target);
  model.backward(g);

  auto loss_at = [&] { return mse_loss(model.forward(input, false), target); };

  GradCheckReport report;
  for (Parameter* p : params) {
    for (std::size_t i = 0; i < p->value.size(); i += stride) {
      const double keep = p->value.data()[i];
      p->value.data()[i] = keep + h;
      const double up = loss_at();
      p->value.data()[i] = keep - h;
      const double dn = loss_at();
      p->value.data()[i] = keep;
      const double fd = (up - dn) / (2.0 * h);
      const double analytic = p->grad.data()[i];
      const double denom = std::max({std::abs(fd), std::abs(analytic), 1e-8});
      const double rel = std::abs(fd - analytic) / denom;
      ++report.checked;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_param = p->id;
        report.worst_index = i;
      }
    }
  }
  for (Parameter* p : params) p->grad.fill(0.0);
  return report;
}

}  // namespace avtpids
