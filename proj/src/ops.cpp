#include "sca/ops.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "sca/errors.hpp"
#include "sca/kernels.hpp"

namespace sca {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw InvalidArgument(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                          " vs " + shape_string(b.shape()));
  }
}

void require_rank(const Tensor& a, int rank, const char* op) {
  if (a.rank() != rank) {
    throw InvalidArgument(std::string(op) + ": expected rank " + std::to_string(rank) +
                          ", got shape " + shape_string(a.shape()));
  }
}

// Elementwise unary op; deriv(x, y) is dy/dx.
template <class Fwd, class Deriv>
Tensor unary(const Tensor& a, Fwd fwd, Deriv deriv) {
  const auto& x = a.values();
  std::vector<double> y(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) y[k] = fwd(x[k]);
  return make_result(a.shape(), std::move(y), {a}, [deriv](Node& self) {
    if (auto* g = input_grad(self, 0)) {
      const auto& xv = self.inputs[0]->value;
      for (std::size_t k = 0; k < xv.size(); ++k) (*g)[k] += self.grad[k] * deriv(xv[k], self.value[k]);
    }
  });
}

struct Chw {
  int c, h, w;
};

Chw as_chw(const Tensor& t, const char* op) {
  if (t.rank() == 3) return {t.dim(0), t.dim(1), t.dim(2)};
  if (t.rank() == 2) return {1, t.dim(0), t.dim(1)};
  throw InvalidArgument(std::string(op) + ": expected [C,H,W] or [H,W], got " +
                        shape_string(t.shape()));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> y(a.numel());
  for (std::size_t k = 0; k < y.size(); ++k) y[k] = a.at(k) + b.at(k);
  return make_result(a.shape(), std::move(y), {a, b}, [](Node& self) {
    for (std::size_t in = 0; in < 2; ++in)
      if (auto* g = input_grad(self, in))
        for (std::size_t k = 0; k < g->size(); ++k) (*g)[k] += self.grad[k];
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> y(a.numel());
  for (std::size_t k = 0; k < y.size(); ++k) y[k] = a.at(k) - b.at(k);
  return make_result(a.shape(), std::move(y), {a, b}, [](Node& self) {
    if (auto* g = input_grad(self, 0))
      for (std::size_t k = 0; k < g->size(); ++k) (*g)[k] += self.grad[k];
    if (auto* g = input_grad(self, 1))
      for (std::size_t k = 0; k < g->size(); ++k) (*g)[k] -= self.grad[k];
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> y(a.numel());
  for (std::size_t k = 0; k < y.size(); ++k) y[k] = a.at(k) * b.at(k);
  return make_result(a.shape(), std::move(y), {a, b}, [](Node& self) {
    const auto& av = self.inputs[0]->value;
    const auto& bv = self.inputs[1]->value;
    if (auto* g = input_grad(self, 0))
      for (std::size_t k = 0; k < g->size(); ++k) (*g)[k] += self.grad[k] * bv[k];
    if (auto* g = input_grad(self, 1))
      for (std::size_t k = 0; k < g->size(); ++k) (*g)[k] += self.grad[k] * av[k];
  });
}

Tensor div(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "div");
  std::vector<double> y(a.numel());
  for (std::size_t k = 0; k < y.size(); ++k) {
    if (b.at(k) == 0.0) throw NumericError("div: division by zero");
    y[k] = a.at(k) / b.at(k);
  }
  return make_result(a.shape(), std::move(y), {a, b}, [](Node& self) {
    const auto& bv = self.inputs[1]->value;
    if (auto* g = input_grad(self, 0))
      for (std::size_t k = 0; k < g->size(); ++k) (*g)[k] += self.grad[k] / bv[k];
    if (auto* g = input_grad(self, 1))
      for (std::size_t k = 0; k < g->size(); ++k) (*g)[k] -= self.grad[k] * self.value[k] / bv[k];
  });
}

Tensor scale(const Tensor& a, double s) {
  return unary(a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor abs(const Tensor& a) {
  return unary(
      a, [](double x) { return std::fabs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor relu(const Tensor& a) {
  return unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& a, double slope) {
  return unary(
      a, [slope](double x) { return x > 0.0 ? x : slope * x; },
      [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

Tensor tanh(const Tensor& a) {
  return unary(
      a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor softplus(const Tensor& a) {
  return unary(
      a, [](double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); },
      [](double x, double) { return 1.0 / (1.0 + std::exp(-x)); });
}

Tensor smooth_l1(const Tensor& a) {
  return unary(
      a,
      [](double x) {
        const double ax = std::fabs(x);
        return ax < 1.0 ? 0.5 * x * x : ax - 0.5;
      },
      [](double x, double) {
        if (std::fabs(x) < 1.0) return x;
        return x > 0.0 ? 1.0 : -1.0;
      });
}

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.values()) acc += v;
  return make_result(Shape{}, {acc}, {a}, [](Node& self) {
    if (auto* g = input_grad(self, 0))
      for (double& v : *g) v += self.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  if (a.numel() == 0) throw InvalidArgument("mean of an empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw InvalidArgument("reshape: " + shape_string(a.shape()) + " -> " + shape_string(shape));
  }
  return make_result(std::move(shape), a.values(), {a}, [](Node& self) {
    if (auto* g = input_grad(self, 0))
      for (std::size_t k = 0; k < g->size(); ++k) (*g)[k] += self.grad[k];
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const int M = a.dim(0), K = a.dim(1), N = b.dim(1);
  if (b.dim(0) != K) {
    throw InvalidArgument("matmul: inner dimensions differ " + shape_string(a.shape()) + " x " +
                          shape_string(b.shape()));
  }
  std::vector<double> y(static_cast<std::size_t>(M) * N, 0.0);
  const auto& av = a.values();
  const auto& bv = b.values();
  for (int m = 0; m < M; ++m)
    for (int k = 0; k < K; ++k) {
      const double s = av[static_cast<std::size_t>(m) * K + k];
      for (int n = 0; n < N; ++n) y[static_cast<std::size_t>(m) * N + n] += s * bv[static_cast<std::size_t>(k) * N + n];
    }
  return make_result(Shape{M, N}, std::move(y), {a, b}, [M, K, N](Node& self) {
    const auto& A = self.inputs[0]->value;
    const auto& B = self.inputs[1]->value;
    const auto& G = self.grad;
    if (auto* g = input_grad(self, 0))
      for (int m = 0; m < M; ++m)
        for (int k = 0; k < K; ++k) {
          double acc = 0.0;
          for (int n = 0; n < N; ++n) acc += G[static_cast<std::size_t>(m) * N + n] * B[static_cast<std::size_t>(k) * N + n];
          (*g)[static_cast<std::size_t>(m) * K + k] += acc;
        }
    if (auto* g = input_grad(self, 1))
      for (int k = 0; k < K; ++k)
        for (int n = 0; n < N; ++n) {
          double acc = 0.0;
          for (int m = 0; m < M; ++m) acc += A[static_cast<std::size_t>(m) * K + k] * G[static_cast<std::size_t>(m) * N + n];
          (*g)[static_cast<std::size_t>(k) * N + n] += acc;
        }
  });
}

Tensor mul_spatial(const Tensor& x, const Tensor& map) {
  require_rank(x, 3, "mul_spatial");
  require_rank(map, 2, "mul_spatial");
  const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
  if (map.dim(0) != H || map.dim(1) != W) {
    throw InvalidArgument("mul_spatial: map " + shape_string(map.shape()) + " vs " +
                          shape_string(x.shape()));
  }
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  std::vector<double> y(x.numel());
  for (int c = 0; c < C; ++c)
    for (std::size_t k = 0; k < plane; ++k) y[c * plane + k] = x.at(c * plane + k) * map.at(k);
  return make_result(x.shape(), std::move(y), {x, map}, [C, plane](Node& self) {
    const auto& xv = self.inputs[0]->value;
    const auto& mv = self.inputs[1]->value;
    if (auto* g = input_grad(self, 0))
      for (int c = 0; c < C; ++c)
        for (std::size_t k = 0; k < plane; ++k) (*g)[c * plane + k] += self.grad[c * plane + k] * mv[k];
    if (auto* g = input_grad(self, 1))
      for (int c = 0; c < C; ++c)
        for (std::size_t k = 0; k < plane; ++k) (*g)[k] += self.grad[c * plane + k] * xv[c * plane + k];
  });
}

Tensor sum_channels(const Tensor& x) {
  require_rank(x, 3, "sum_channels");
  const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  std::vector<double> y(plane, 0.0);
  for (int c = 0; c < C; ++c)
    for (std::size_t k = 0; k < plane; ++k) y[k] += x.at(c * plane + k);
  return make_result(Shape{H, W}, std::move(y), {x}, [C, plane](Node& self) {
    if (auto* g = input_grad(self, 0))
      for (int c = 0; c < C; ++c)
        for (std::size_t k = 0; k < plane; ++k) (*g)[c * plane + k] += self.grad[k];
  });
}

Tensor concat_channels(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw InvalidArgument("concat_channels: no inputs");
  const int H = parts[0].dim(1), W = parts[0].dim(2);
  int C = 0;
  for (const auto& p : parts) {
    require_rank(p, 3, "concat_channels");
    if (p.dim(1) != H || p.dim(2) != W) {
      throw InvalidArgument("concat_channels: spatial mismatch " + shape_string(p.shape()));
    }
    C += p.dim(0);
  }
  std::vector<double> y;
  y.reserve(static_cast<std::size_t>(C) * H * W);
  for (const auto& p : parts) y.insert(y.end(), p.values().begin(), p.values().end());
  return make_result(Shape{C, H, W}, std::move(y), parts, [](Node& self) {
    std::size_t offset = 0;
    for (std::size_t in = 0; in < self.inputs.size(); ++in) {
      const std::size_t n = self.inputs[in]->value.size();
      if (auto* g = input_grad(self, in))
        for (std::size_t k = 0; k < n; ++k) (*g)[k] += self.grad[offset + k];
      offset += n;
    }
  });
}

Tensor slice_channels(const Tensor& x, int begin, int end) {
  require_rank(x, 3, "slice_channels");
  if (begin < 0 || end > x.dim(0) || begin >= end) {
    throw InvalidArgument("slice_channels: bad range for " + shape_string(x.shape()));
  }
  const std::size_t plane = static_cast<std::size_t>(x.dim(1)) * x.dim(2);
  const auto first = x.values().begin() + static_cast<std::ptrdiff_t>(begin * plane);
  const auto last = x.values().begin() + static_cast<std::ptrdiff_t>(end * plane);
  const std::size_t off = begin * plane;
  return make_result(Shape{end - begin, x.dim(1), x.dim(2)}, std::vector<double>(first, last), {x},
                     [off](Node& self) {
                       if (auto* g = input_grad(self, 0))
                         for (std::size_t k = 0; k < self.grad.size(); ++k) (*g)[off + k] += self.grad[k];
                     });
}

Tensor flip_horizontal(const Tensor& x) {
  if (x.rank() < 1) throw InvalidArgument("flip_horizontal: scalar input");
  const int W = x.dim(-1);
  const std::size_t rows = x.numel() / static_cast<std::size_t>(W);
  std::vector<double> y(x.numel());
  for (std::size_t r = 0; r < rows; ++r)
    for (int i = 0; i < W; ++i) y[r * W + i] = x.at(r * W + (W - 1 - i));
  return make_result(x.shape(), std::move(y), {x}, [rows, W](Node& self) {
    if (auto* g = input_grad(self, 0))
      for (std::size_t r = 0; r < rows; ++r)
        for (int i = 0; i < W; ++i) (*g)[r * W + (W - 1 - i)] += self.grad[r * W + i];
  });
}

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride,
              int padding) {
  require_rank(input, 3, "conv2d");
  require_rank(weight, 4, "conv2d");
  if (input.dim(0) != weight.dim(1)) {
    throw InvalidArgument("conv2d: input has " + std::to_string(input.dim(0)) +
                          " channels, kernel expects " + std::to_string(weight.dim(1)));
  }
  if (weight.dim(2) % 2 == 0 || weight.dim(3) % 2 == 0) {
    throw InvalidArgument("conv2d: kernel size must be odd, got " + shape_string(weight.shape()));
  }
  if (stride < 1 || padding < 0) throw InvalidArgument("conv2d: stride >= 1 and padding >= 0");
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != weight.dim(0))) {
    throw InvalidArgument("conv2d: bias shape " + shape_string(bias.shape()));
  }
  const kernels::ConvGeometry g{input.dim(0), input.dim(1), input.dim(2), weight.dim(0),
                                weight.dim(2), weight.dim(3), stride, padding};
  if (g.out_height() < 1 || g.out_width() < 1) {
    throw InvalidArgument("conv2d: empty output for input " + shape_string(input.shape()));
  }
  std::vector<double> y(static_cast<std::size_t>(g.out_channels) * g.out_height() * g.out_width());
  kernels::conv2d_forward(g, input.data(), weight.data(),
                          bias.defined() ? bias.data() : std::span<const double>{}, y);
  std::vector<Tensor> inputs{input, weight};
  const bool has_bias = bias.defined();
  if (has_bias) inputs.push_back(bias);
  return make_result(Shape{g.out_channels, g.out_height(), g.out_width()}, std::move(y),
                     std::move(inputs), [g, has_bias](Node& self) {
                       const auto& in = self.inputs[0]->value;
                       const auto& wt = self.inputs[1]->value;
                       if (auto* gi = input_grad(self, 0))
                         kernels::conv2d_backward_input(g, self.grad, wt, *gi);
                       auto* gw = input_grad(self, 1);
                       auto* gb = has_bias ? input_grad(self, 2) : nullptr;
                       if (gw) {
                         kernels::conv2d_backward_weight(
                             g, self.grad, in, *gw, gb ? std::span<double>(*gb) : std::span<double>{});
                       } else if (gb) {
                         const std::size_t plane = static_cast<std::size_t>(g.out_height()) * g.out_width();
                         for (int co = 0; co < g.out_channels; ++co)
                           for (std::size_t k = 0; k < plane; ++k) (*gb)[co] += self.grad[co * plane + k];
                       }
                     });
}

Tensor softmax(const Tensor& logits, int axis) {
  const int r = logits.rank();
  if (axis < 0) axis += r;
  if (axis < 0 || axis >= r) throw InvalidArgument("softmax: axis out of range");
  const Shape& s = logits.shape();
  std::size_t outer = 1, inner = 1;
  for (int k = 0; k < axis; ++k) outer *= s[k];
  for (int k = axis + 1; k < r; ++k) inner *= s[k];
  const int n = s[axis];
  const auto& x = logits.values();
  std::vector<double> y(x.size(), 0.0);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * n * inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (int k = 0; k < n; ++k) mx = std::max(mx, x[base + k * inner]);
      if (mx == -std::numeric_limits<double>::infinity()) continue;  // fully masked slice
      double z = 0.0;
      for (int k = 0; k < n; ++k) {
        const double e = std::exp(x[base + k * inner] - mx);
        y[base + k * inner] = e;
        z += e;
      }
      for (int k = 0; k < n; ++k) y[base + k * inner] /= z;
    }
  return make_result(s, std::move(y), {logits}, [outer, inner, n](Node& self) {
    if (auto* g = input_grad(self, 0))
      for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t in = 0; in < inner; ++in) {
          const std::size_t base = o * n * inner + in;
          double dot = 0.0;
          for (int k = 0; k < n; ++k) dot += self.grad[base + k * inner] * self.value[base + k * inner];
          for (int k = 0; k < n; ++k) {
            const std::size_t idx = base + k * inner;
            (*g)[idx] += self.value[idx] * (self.grad[idx] - dot);
          }
        }
  });
}

Tensor channel_mean(const Tensor& x) {
  require_rank(x, 3, "channel_mean");
  const int C = x.dim(0);
  const std::size_t plane = static_cast<std::size_t>(x.dim(1)) * x.dim(2);
  std::vector<double> y(C, 0.0);
  for (int c = 0; c < C; ++c) {
    double acc = 0.0;
    for (std::size_t k = 0; k < plane; ++k) acc += x.at(c * plane + k);
    y[c] = acc / static_cast<double>(plane);
  }
  return make_result(Shape{C}, std::move(y), {x}, [C, plane](Node& self) {
    if (auto* g = input_grad(self, 0))
      for (int c = 0; c < C; ++c) {
        const double v = self.grad[c] / static_cast<double>(plane);
        for (std::size_t k = 0; k < plane; ++k) (*g)[c * plane + k] += v;
      }
  });
}

namespace {

struct Moments {
  std::vector<double> mean, var;
};

Moments channel_moments(const Tensor& x) {
  const int C = x.dim(0);
  const std::size_t plane = static_cast<std::size_t>(x.dim(1)) * x.dim(2);
  Moments m{std::vector<double>(C), std::vector<double>(C)};
  for (int c = 0; c < C; ++c) {
    double acc = 0.0;
    for (std::size_t k = 0; k < plane; ++k) acc += x.at(c * plane + k);
    const double mu = acc / static_cast<double>(plane);
    double sq = 0.0;
    for (std::size_t k = 0; k < plane; ++k) {
      const double d = x.at(c * plane + k) - mu;
      sq += d * d;
    }
    m.mean[c] = mu;
    m.var[c] = sq / static_cast<double>(plane);
  }
  return m;
}

}  // namespace

Tensor channel_std(const Tensor& x, double eps) {
  require_rank(x, 3, "channel_std");
  const int C = x.dim(0);
  const std::size_t plane = static_cast<std::size_t>(x.dim(1)) * x.dim(2);
  const Moments m = channel_moments(x);
  std::vector<double> y(C);
  for (int c = 0; c < C; ++c) y[c] = std::sqrt(m.var[c] + eps);
  return make_result(Shape{C}, std::move(y), {x}, [C, plane, mu = m.mean](Node& self) {
    if (auto* g = input_grad(self, 0)) {
      const auto& xv = self.inputs[0]->value;
      for (int c = 0; c < C; ++c) {
        const double f = self.grad[c] / (static_cast<double>(plane) * self.value[c]);
        for (std::size_t k = 0; k < plane; ++k) (*g)[c * plane + k] += f * (xv[c * plane + k] - mu[c]);
      }
    }
  });
}

Tensor instance_norm(const Tensor& x, double eps) {
  require_rank(x, 3, "instance_norm");
  const int C = x.dim(0);
  const std::size_t plane = static_cast<std::size_t>(x.dim(1)) * x.dim(2);
  const Moments m = channel_moments(x);
  std::vector<double> inv_std(C);
  std::vector<double> y(x.numel());
  for (int c = 0; c < C; ++c) {
    inv_std[c] = 1.0 / std::sqrt(m.var[c] + eps);
    for (std::size_t k = 0; k < plane; ++k) y[c * plane + k] = (x.at(c * plane + k) - m.mean[c]) * inv_std[c];
  }
  return make_result(x.shape(), std::move(y), {x}, [C, plane, inv_std](Node& self) {
    if (auto* g = input_grad(self, 0))
      for (int c = 0; c < C; ++c) {
        const double* gy = self.grad.data() + c * plane;
        const double* yv = self.value.data() + c * plane;
        double gmean = 0.0, gymean = 0.0;
        for (std::size_t k = 0; k < plane; ++k) {
          gmean += gy[k];
          gymean += gy[k] * yv[k];
        }
        gmean /= static_cast<double>(plane);
        gymean /= static_cast<double>(plane);
        for (std::size_t k = 0; k < plane; ++k)
          (*g)[c * plane + k] += inv_std[c] * (gy[k] - gmean - yv[k] * gymean);
      }
  });
}

Tensor modulate_channels(const Tensor& x, const Tensor& scale_c, const Tensor& shift_c) {
  require_rank(x, 3, "modulate_channels");
  const int C = x.dim(0);
  if (scale_c.shape() != Shape{C} || shift_c.shape() != Shape{C}) {
    throw InvalidArgument("modulate_channels: scale/shift must be [C]");
  }
  const std::size_t plane = static_cast<std::size_t>(x.dim(1)) * x.dim(2);
  std::vector<double> y(x.numel());
  for (int c = 0; c < C; ++c)
    for (std::size_t k = 0; k < plane; ++k)
      y[c * plane + k] = x.at(c * plane + k) * scale_c.at(c) + shift_c.at(c);
  return make_result(x.shape(), std::move(y), {x, scale_c, shift_c}, [C, plane](Node& self) {
    const auto& xv = self.inputs[0]->value;
    const auto& sv = self.inputs[1]->value;
    auto* gx = input_grad(self, 0);
    auto* gs = input_grad(self, 1);
    auto* gb = input_grad(self, 2);
    for (int c = 0; c < C; ++c) {
      double acc_s = 0.0, acc_b = 0.0;
      for (std::size_t k = 0; k < plane; ++k) {
        const double gv = self.grad[c * plane + k];
        if (gx) (*gx)[c * plane + k] += gv * sv[c];
        acc_s += gv * xv[c * plane + k];
        acc_b += gv;
      }
      if (gs) (*gs)[c] += acc_s;
      if (gb) (*gb)[c] += acc_b;
    }
  });
}

Tensor box_filter3(const Tensor& x) {
  const Chw d = as_chw(x, "box_filter3");
  if (d.h < 2 || d.w < 2) throw InvalidArgument("box_filter3: needs H, W >= 2");
  std::vector<double> y(x.numel());
  kernels::box3_forward(d.c, d.h, d.w, x.data(), y);
  return make_result(x.shape(), std::move(y), {x}, [d](Node& self) {
    if (auto* g = input_grad(self, 0)) kernels::box3_backward(d.c, d.h, d.w, self.grad, *g);
  });
}

Tensor avg_pool2(const Tensor& x) {
  require_rank(x, 3, "avg_pool2");
  const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
  if (H % 2 || W % 2) throw InvalidArgument("avg_pool2: even H and W required");
  const int Ho = H / 2, Wo = W / 2;
  std::vector<double> y(static_cast<std::size_t>(C) * Ho * Wo);
  const auto& xv = x.values();
  for (int c = 0; c < C; ++c)
    for (int oy = 0; oy < Ho; ++oy)
      for (int ox = 0; ox < Wo; ++ox) {
        const std::size_t b = (static_cast<std::size_t>(c) * H + 2 * oy) * W + 2 * ox;
        y[(static_cast<std::size_t>(c) * Ho + oy) * Wo + ox] =
            0.25 * (xv[b] + xv[b + 1] + xv[b + W] + xv[b + W + 1]);
      }
  return make_result(Shape{C, Ho, Wo}, std::move(y), {x}, [C, H, W, Ho, Wo](Node& self) {
    if (auto* g = input_grad(self, 0))
      for (int c = 0; c < C; ++c)
        for (int oy = 0; oy < Ho; ++oy)
          for (int ox = 0; ox < Wo; ++ox) {
            const double v = 0.25 * self.grad[(static_cast<std::size_t>(c) * Ho + oy) * Wo + ox];
            const std::size_t b = (static_cast<std::size_t>(c) * H + 2 * oy) * W + 2 * ox;
            (*g)[b] += v;
            (*g)[b + 1] += v;
            (*g)[b + W] += v;
            (*g)[b + W + 1] += v;
          }
  });
}

Tensor upsample_nearest2(const Tensor& x) {
  require_rank(x, 3, "upsample_nearest2");
  const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
  const int Ho = 2 * H, Wo = 2 * W;
  std::vector<double> y(static_cast<std::size_t>(C) * Ho * Wo);
  for (int c = 0; c < C; ++c)
    for (int oy = 0; oy < Ho; ++oy)
      for (int ox = 0; ox < Wo; ++ox)
        y[(static_cast<std::size_t>(c) * Ho + oy) * Wo + ox] = x.at(c, oy / 2, ox / 2);
  return make_result(Shape{C, Ho, Wo}, std::move(y), {x}, [C, H, W, Ho, Wo](Node& self) {
    if (auto* g = input_grad(self, 0))
      for (int c = 0; c < C; ++c)
        for (int oy = 0; oy < Ho; ++oy)
          for (int ox = 0; ox < Wo; ++ox)
            (*g)[(static_cast<std::size_t>(c) * H + oy / 2) * W + ox / 2] +=
                self.grad[(static_cast<std::size_t>(c) * Ho + oy) * Wo + ox];
  });
}

Tensor upsample_bilinear(const Tensor& x, int factor) {
  if (factor < 1) throw InvalidArgument("upsample_bilinear: factor must be >= 1");
  if (factor == 1) return x;
  const Chw d = as_chw(x, "upsample_bilinear");
  Shape out_shape = x.rank() == 3 ? Shape{d.c, d.h * factor, d.w * factor}
                                  : Shape{d.h * factor, d.w * factor};
  std::vector<double> y(static_cast<std::size_t>(d.c) * d.h * factor * d.w * factor);
  kernels::upsample_bilinear_forward(d.c, d.h, d.w, factor, x.data(), y);
  return make_result(std::move(out_shape), std::move(y), {x}, [d, factor](Node& self) {
    if (auto* g = input_grad(self, 0))
      kernels::upsample_bilinear_backward(d.c, d.h, d.w, factor, self.grad, *g);
  });
}

Tensor warp_horizontal(const Tensor& src, const Tensor& offset) {
  const Chw d = as_chw(src, "warp_horizontal");
  require_rank(offset, 2, "warp_horizontal");
  if (offset.dim(0) != d.h || offset.dim(1) != d.w) {
    throw InvalidArgument("warp_horizontal: offset " + shape_string(offset.shape()) +
                          " vs source " + shape_string(src.shape()));
  }
  std::vector<double> y(src.numel());
  kernels::warp_forward(d.c, d.h, d.w, src.data(), offset.data(), y);
  return make_result(src.shape(), std::move(y), {src, offset}, [d](Node& self) {
    auto* gs = input_grad(self, 0);
    auto* go = input_grad(self, 1);
    kernels::warp_backward(d.c, d.h, d.w, self.grad, self.inputs[0]->value, self.inputs[1]->value,
                           gs ? std::span<double>(*gs) : std::span<double>{},
                           go ? std::span<double>(*go) : std::span<double>{});
  });
}

Tensor epipolar_dot(const Tensor& a, const Tensor& b, int max_offset, int step, double scl,
                    double fill) {
  require_rank(a, 3, "epipolar_dot");
  require_same_shape(a, b, "epipolar_dot");
  if (step != -1 && step != 1) throw InvalidArgument("epipolar_dot: step must be -1 or +1");
  const int C = a.dim(0), H = a.dim(1), W = a.dim(2);
  if (max_offset < 0 || max_offset >= W) {
    throw InvalidArgument("epipolar_dot: max offset " + std::to_string(max_offset) +
                          " must lie in [0, W) with W = " + std::to_string(W));
  }
  std::vector<double> y(static_cast<std::size_t>(max_offset + 1) * H * W);
  kernels::epipolar_dot_forward(C, H, W, max_offset, step, scl, fill, a.data(), b.data(), y);
  return make_result(Shape{max_offset + 1, H, W}, std::move(y), {a, b},
                     [C, H, W, max_offset, step, scl](Node& self) {
                       auto* ga = input_grad(self, 0);
                       auto* gb = input_grad(self, 1);
                       kernels::epipolar_dot_backward(
                           C, H, W, max_offset, step, scl, self.grad, self.inputs[0]->value,
                           self.inputs[1]->value, ga ? std::span<double>(*ga) : std::span<double>{},
                           gb ? std::span<double>(*gb) : std::span<double>{});
                     });
}

Tensor epipolar_gather(const Tensor& weights, const Tensor& values, int max_offset, int step) {
  require_rank(weights, 3, "epipolar_gather");
  require_rank(values, 3, "epipolar_gather");
  if (step != -1 && step != 1) throw InvalidArgument("epipolar_gather: step must be -1 or +1");
  const int C = values.dim(0), H = values.dim(1), W = values.dim(2);
  if (weights.dim(0) != max_offset + 1 || weights.dim(1) != H || weights.dim(2) != W) {
    throw InvalidArgument("epipolar_gather: weights " + shape_string(weights.shape()) +
                          " incompatible with values " + shape_string(values.shape()));
  }
  std::vector<double> y(values.numel());
  kernels::epipolar_gather_forward(C, H, W, max_offset, step, weights.data(), values.data(), y);
  return make_result(values.shape(), std::move(y), {weights, values},
                     [C, H, W, max_offset, step](Node& self) {
                       auto* gw = input_grad(self, 0);
                       auto* gv = input_grad(self, 1);
                       kernels::epipolar_gather_backward(
                           C, H, W, max_offset, step, self.grad, self.inputs[0]->value,
                           self.inputs[1]->value, gw ? std::span<double>(*gw) : std::span<double>{},
                           gv ? std::span<double>(*gv) : std::span<double>{});
                     });
}

}  // namespace sca
