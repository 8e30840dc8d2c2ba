#include "sca/spectral_norm.hpp"

#include <cmath>

#include "sca/errors.hpp"
#include "sca/ops.hpp"

namespace sca {

namespace {

int matrix_rows(const Tensor& kernel) {
  if (kernel.rank() < 2) throw InvalidArgument("spectral_normalize: kernel must have rank >= 2");
  return kernel.dim(0);
}

// v = W^T u, returns |v| and leaves v unnormalised.
double transpose_apply(const std::vector<double>& w, int rows, int cols,
                       const std::vector<double>& u, std::vector<double>& v) {
  v.assign(static_cast<std::size_t>(cols), 0.0);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) v[c] += w[static_cast<std::size_t>(r) * cols + c] * u[r];
  double n = 0.0;
  for (double x : v) n += x * x;
  return std::sqrt(n);
}

double apply(const std::vector<double>& w, int rows, int cols, const std::vector<double>& v,
             std::vector<double>& u) {
  u.assign(static_cast<std::size_t>(rows), 0.0);
  for (int r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (int c = 0; c < cols; ++c) acc += w[static_cast<std::size_t>(r) * cols + c] * v[c];
    u[r] = acc;
  }
  double n = 0.0;
  for (double x : u) n += x * x;
  return std::sqrt(n);
}

}  // namespace

SpectralNormState make_spectral_norm_state(int rows, Rng& rng, int iterations_per_step) {
  if (rows < 1 || iterations_per_step < 1) throw InvalidArgument("make_spectral_norm_state: bad sizes");
  SpectralNormState s;
  s.power_iterations_per_step = iterations_per_step;
  s.u_vector.resize(static_cast<std::size_t>(rows));
  double n = 0.0;
  for (double& x : s.u_vector) {
    x = rng.normal();
    n += x * x;
  }
  n = std::sqrt(n);
  for (double& x : s.u_vector) x /= n;
  return s;
}

void power_iterate(const Tensor& kernel, SpectralNormState& state, int iterations) {
  const int rows = matrix_rows(kernel);
  const int cols = static_cast<int>(kernel.numel()) / rows;
  if (static_cast<int>(state.u_vector.size()) != rows) {
    throw InvalidArgument("power_iterate: state has " + std::to_string(state.u_vector.size()) +
                          " rows, kernel has " + std::to_string(rows));
  }
  const auto& w = kernel.values();
  std::vector<double> v, u;
  for (int it = 0; it < iterations; ++it) {
    const double nv = transpose_apply(w, rows, cols, state.u_vector, v);
    if (nv == 0.0) return;  // u is in the left null space; keep it
    for (double& x : v) x /= nv;
    const double nu = apply(w, rows, cols, v, u);
    if (nu == 0.0) return;
    for (double& x : u) x /= nu;
    state.u_vector = u;
  }
}

double spectral_norm_estimate(const Tensor& kernel, const SpectralNormState& state) {
  const int rows = matrix_rows(kernel);
  const int cols = static_cast<int>(kernel.numel()) / rows;
  std::vector<double> v;
  return transpose_apply(kernel.values(), rows, cols, state.u_vector, v);
}

Tensor spectral_normalize(const Tensor& kernel, SpectralNormState& state, bool update) {
  const int rows = matrix_rows(kernel);
  const int cols = static_cast<int>(kernel.numel()) / rows;
  if (update) power_iterate(kernel, state, state.power_iterations_per_step);

  std::vector<double> v;
  const double sigma = transpose_apply(kernel.values(), rows, cols, state.u_vector, v);
  if (sigma == 0.0) return reshape(kernel, kernel.shape());
  for (double& x : v) x /= sigma;

  std::vector<double> y(kernel.numel());
  for (std::size_t k = 0; k < y.size(); ++k) y[k] = kernel.at(k) / sigma;
  return make_result(kernel.shape(), std::move(y), {kernel},
                     [rows, cols, sigma, u = state.u_vector, v](Node& self) {
                       auto* g = input_grad(self, 0);
                       if (!g) return;
                       const auto& w = self.inputs[0]->value;
                       // d(W/s)/dW with s = u^T W v and ds/dW = u v^T.
                       double gw = 0.0;
                       for (std::size_t k = 0; k < w.size(); ++k) gw += self.grad[k] * w[k];
                       const double coef = gw / (sigma * sigma);
                       for (int r = 0; r < rows; ++r)
                         for (int c = 0; c < cols; ++c) {
                           const std::size_t k = static_cast<std::size_t>(r) * cols + c;
                           (*g)[k] += self.grad[k] / sigma - coef * u[r] * v[c];
                         }
                     });
}

}  // namespace sca
