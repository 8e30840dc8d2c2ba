#include "sca/optim.hpp"

#include <cmath>

#include "sca/errors.hpp"

namespace sca {

void adam_step(std::span<Tensor> params, std::span<const std::span<const double>> grads,
               AdamState& state) {
  if (params.size() != grads.size()) throw InvalidArgument("adam_step: params/grads count mismatch");
  if (!(state.learning_rate > 0.0)) throw InvalidArgument("adam_step: learning rate must be > 0");
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (!grads[p].empty() && grads[p].size() != params[p].numel()) {
      throw InvalidArgument("adam_step: gradient size mismatch for parameter " + std::to_string(p));
    }
    for (double g : grads[p])
      if (!std::isfinite(g)) throw NumericError("adam_step: non-finite gradient in parameter " + std::to_string(p));
  }
  if (state.first_moment.empty()) {
    for (const auto& t : params) {
      state.first_moment.emplace_back(t.numel(), 0.0);
      state.second_moment.emplace_back(t.numel(), 0.0);
    }
  }
  if (state.first_moment.size() != params.size()) throw InvalidArgument("adam_step: state/params mismatch");

  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto w = params[p].mutable_data();
    auto& m = state.first_moment[p];
    auto& v = state.second_moment[p];
    const bool zero = grads[p].empty();
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double g = zero ? 0.0 : grads[p][k];
      m[k] = state.beta1 * m[k] + (1.0 - state.beta1) * g;
      v[k] = state.beta2 * v[k] + (1.0 - state.beta2) * g * g;
      const double mhat = m[k] / c1;
      const double vhat = v[k] / c2;
      w[k] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
    }
  }
}

Adam::Adam(std::vector<Tensor> params, double learning_rate, double beta1, double beta2,
           double epsilon)
    : params_(std::move(params)) {
  state_.learning_rate = learning_rate;
  state_.beta1 = beta1;
  state_.beta2 = beta2;
  state_.epsilon = epsilon;
}

void Adam::step() {
  std::vector<std::span<const double>> grads;
  grads.reserve(params_.size());
  for (const auto& p : params_) grads.push_back(p.has_grad() ? p.grad() : std::span<const double>{});
  adam_step(params_, grads, state_);
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

}  // namespace sca
