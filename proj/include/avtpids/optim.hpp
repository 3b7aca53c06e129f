#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "avtpids/tensor.hpp"

namespace avtpids {

// Bias-corrected Adam over an externally owned parameter list.  step()
// consumes the accumulated gradients and zeroes them afterwards.
class Adam {
 public:
  explicit Adam(std::vector<Parameter*> params, double lr = 1e-4, double beta1 = 0.9,
                double beta2 = 0.999, double eps = 1e-8);

  void step();
  void zero_grad();

  double learning_rate() const { return lr_; }
  std::uint64_t step_count() const { return t_; }
  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }
  // Restores serialized optimizer state; moment shapes must match the params.
  void restore(std::vector<Tensor> m, std::vector<Tensor> v, std::uint64_t t);

 private:
  std::vector<Parameter*> params_;
  double lr_, beta1_, beta2_, eps_;
  std::uint64_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

// Central-finite-difference audit of the analytic gradients of a model under
// mean-squared-error reconstruction loss.
struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
};

class Sequential;

// Probes every parameter element whose index is a multiple of `stride`
// (stride 1 checks all).  `h` is the central-difference half-step.
GradCheckReport grad_check(Sequential& model, const Tensor& input, const Tensor& target,
                           double h = 1e-4, std::size_t stride = 1);

}  // namespace avtpids
