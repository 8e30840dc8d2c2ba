#pragma once

#include <vector>

#include "sca/rng.hpp"
#include "sca/tensor.hpp"

namespace sca {

// Power-iteration state for one kernel, viewed as a [rows, numel/rows]
// matrix (rows = output channels).
struct SpectralNormState {
  std::vector<double> u_vector;  // unit norm
  int power_iterations_per_step = 1;
};

SpectralNormState make_spectral_norm_state(int rows, Rng& rng, int iterations_per_step = 1);

// Runs `iterations` power-iteration updates of u for `kernel`.
void power_iterate(const Tensor& kernel, SpectralNormState& state, int iterations);

// sigma_hat = u^T W v with v = W^T u / |W^T u|.
double spectral_norm_estimate(const Tensor& kernel, const SpectralNormState& state);

// kernel / sigma_hat. With update=true the state first advances by
// power_iterations_per_step iterations. u and v are treated as constants for
// the gradient. A zero kernel is returned unchanged.
Tensor spectral_normalize(const Tensor& kernel, SpectralNormState& state, bool update = true);

}  // namespace sca
