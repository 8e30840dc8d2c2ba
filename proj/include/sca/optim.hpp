#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sca/tensor.hpp"

namespace sca {

struct AdamState {
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::int64_t step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double learning_rate = 1e-4;
};

// Bias-corrected Adam update applied in place. `grads[k]` may be empty,
// meaning a zero gradient for params[k]. Throws NumericError (and leaves
// everything untouched) if any gradient is non-finite.
void adam_step(std::span<Tensor> params, std::span<const std::span<const double>> grads,
               AdamState& state);

// Convenience wrapper that reads gradients straight from the parameters.
class Adam {
 public:
  Adam(std::vector<Tensor> params, double learning_rate, double beta1, double beta2,
       double epsilon = 1e-8);

  void step();
  void zero_grad();
  const AdamState& state() const { return state_; }
  const std::vector<Tensor>& params() const { return params_; }

 private:
  std::vector<Tensor> params_;
  AdamState state_;
};

}  // namespace sca
