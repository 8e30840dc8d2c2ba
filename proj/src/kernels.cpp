#include "sca/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

// GEMM tiles are threaded by our own OpenMP loops.
#define EIGEN_DONT_PARALLELIZE
#include <Eigen/Core>

namespace sca::kernels {

namespace {

// Smallest o >= 0 with o * s + k - p >= 0.
inline int first_valid(int k, int p, int s) {
  const int num = p - k;
  return num <= 0 ? 0 : (num + s - 1) / s;
}

// One past the largest o < out_extent with o * s + k - p <= extent - 1.
inline int end_valid(int k, int p, int s, int extent, int out_extent) {
  const int num = extent - 1 + p - k;
  if (num < 0) return 0;
  return std::min(out_extent, num / s + 1);
}

inline int reflect(int k, int n) {
  if (k < 0) return -k;
  if (k >= n) return 2 * n - 2 - k;
  return k;
}

struct Lerp {
  int lo, hi;
  double frac;
};

std::vector<Lerp> lerp_table(int in_extent, int factor) {
  std::vector<Lerp> t(static_cast<std::size_t>(in_extent) * factor);
  for (int o = 0; o < in_extent * factor; ++o) {
    double src = (o + 0.5) / factor - 0.5;
    if (src < 0.0) src = 0.0;
    int lo = static_cast<int>(std::floor(src));
    if (lo > in_extent - 1) lo = in_extent - 1;
    const int hi = std::min(lo + 1, in_extent - 1);
    t[static_cast<std::size_t>(o)] = {lo, hi, src - lo};
  }
  return t;
}

}  // namespace

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Strided = Eigen::OuterStride<>;

// Output pixels per GEMM tile. Fixed, so every tile's product (and its
// rounding) is the same whatever the thread count.
constexpr int kTile = 256;

int tile_count(int n) { return (n + kTile - 1) / kTile; }

// Patch matrix [Ci*kh*kw, n] for output pixels [n0, n0 + n).
void im2col_tile(const ConvGeometry& g, const double* in, int n0, int n, double* col) {
  const int Wo = g.out_width(), kk = g.kernel_h * g.kernel_w;
  const int K = g.in_channels * kk;
  std::vector<int> ys(static_cast<std::size_t>(n)), xs(static_cast<std::size_t>(n));
  for (int t = 0; t < n; ++t) {
    ys[static_cast<std::size_t>(t)] = (n0 + t) / Wo * g.stride - g.padding;
    xs[static_cast<std::size_t>(t)] = (n0 + t) % Wo * g.stride - g.padding;
  }
  for (int r = 0; r < K; ++r) {
    const int ci = r / kk, ky = r % kk / g.kernel_w, kx = r % g.kernel_w;
    const double* plane = in + static_cast<std::size_t>(ci) * g.height * g.width;
    double* row = col + static_cast<std::size_t>(r) * n;
    for (int t = 0; t < n; ++t) {
      const int y = ys[static_cast<std::size_t>(t)] + ky, x = xs[static_cast<std::size_t>(t)] + kx;
      row[t] = (y >= 0 && y < g.height && x >= 0 && x < g.width) ? plane[static_cast<std::size_t>(y) * g.width + x] : 0.0;
    }
  }
}

}  // namespace

void conv2d_forward(const ConvGeometry& g, std::span<const double> input,
                    std::span<const double> weight, std::span<const double> bias,
                    std::span<double> out) {
  const int N = g.out_height() * g.out_width(), Co = g.out_channels;
  const int K = g.in_channels * g.kernel_h * g.kernel_w;
  const Eigen::Map<const RowMat> w(weight.data(), Co, K);
  const int tiles = tile_count(N);
#pragma omp parallel for schedule(static)
  for (int t = 0; t < tiles; ++t) {
    const int n0 = t * kTile, n = std::min(kTile, N - n0);
    std::vector<double> col(static_cast<std::size_t>(K) * n);
    im2col_tile(g, input.data(), n0, n, col.data());
    Eigen::Map<RowMat, 0, Strided> o(out.data() + n0, Co, n, Strided(N));
    o.noalias() = w * Eigen::Map<const RowMat>(col.data(), K, n);
    if (!bias.empty())
      for (int c = 0; c < Co; ++c) o.row(c).array() += bias[static_cast<std::size_t>(c)];
  }
}

void conv2d_backward_input(const ConvGeometry& g, std::span<const double> grad_out,
                           std::span<const double> weight, std::span<double> grad_input) {
  const int N = g.out_height() * g.out_width(), Co = g.out_channels, Wo = g.out_width();
  const int kk = g.kernel_h * g.kernel_w, K = g.in_channels * kk;
  const Eigen::Map<const RowMat> w(weight.data(), Co, K);
  // Patch-space gradient [K, N]; scattered back per input channel below.
  std::vector<double> colg(static_cast<std::size_t>(K) * N);
  const int tiles = tile_count(N);
#pragma omp parallel for schedule(static)
  for (int t = 0; t < tiles; ++t) {
    const int n0 = t * kTile, n = std::min(kTile, N - n0);
    Eigen::Map<RowMat, 0, Strided> c(colg.data() + n0, K, n, Strided(N));
    c.noalias() = w.transpose() * Eigen::Map<const RowMat, 0, Strided>(grad_out.data() + n0, Co, n, Strided(N));
  }
#pragma omp parallel for schedule(static)
  for (int ci = 0; ci < g.in_channels; ++ci) {
    double* plane = grad_input.data() + static_cast<std::size_t>(ci) * g.height * g.width;
    for (int r = ci * kk; r < (ci + 1) * kk; ++r) {
      const int ky = r % kk / g.kernel_w, kx = r % g.kernel_w;
      const double* row = colg.data() + static_cast<std::size_t>(r) * N;
      for (int oy = first_valid(ky, g.padding, g.stride), oy1 = end_valid(ky, g.padding, g.stride, g.height, g.out_height());
           oy < oy1; ++oy) {
        double* irow = plane + static_cast<std::size_t>(oy * g.stride + ky - g.padding) * g.width + (kx - g.padding);
        const double* grow = row + static_cast<std::size_t>(oy) * Wo;
        const int ox0 = first_valid(kx, g.padding, g.stride), ox1 = end_valid(kx, g.padding, g.stride, g.width, Wo);
        for (int ox = ox0; ox < ox1; ++ox) irow[ox * g.stride] += grow[ox];
      }
    }
  }
}

void conv2d_backward_weight(const ConvGeometry& g, std::span<const double> grad_out,
                            std::span<const double> input, std::span<double> grad_weight,
                            std::span<double> grad_bias) {
  const int N = g.out_height() * g.out_width(), Co = g.out_channels;
  const int K = g.in_channels * g.kernel_h * g.kernel_w;
  const int tiles = tile_count(N);
  // Per-tile partial products, reduced in tile order.
  std::vector<RowMat> partial(static_cast<std::size_t>(tiles));
#pragma omp parallel for schedule(static)
  for (int t = 0; t < tiles; ++t) {
    const int n0 = t * kTile, n = std::min(kTile, N - n0);
    std::vector<double> col(static_cast<std::size_t>(K) * n);
    im2col_tile(g, input.data(), n0, n, col.data());
    partial[static_cast<std::size_t>(t)].noalias() =
        Eigen::Map<const RowMat, 0, Strided>(grad_out.data() + n0, Co, n, Strided(N)) *
        Eigen::Map<const RowMat>(col.data(), K, n).transpose();
  }
  Eigen::Map<RowMat> gw(grad_weight.data(), Co, K);
  for (const RowMat& p : partial) gw += p;
  if (!grad_bias.empty()) {
    for (int c = 0; c < Co; ++c) {
      const double* row = grad_out.data() + static_cast<std::size_t>(c) * N;
      double acc = 0.0;
      for (int k = 0; k < N; ++k) acc += row[k];
      grad_bias[static_cast<std::size_t>(c)] += acc;
    }
  }
}

void epipolar_dot_forward(int channels, int height, int width, int max_offset, int step,
                          double scale, double fill, std::span<const double> a,
                          std::span<const double> b, std::span<double> out) {
  const std::size_t plane = static_cast<std::size_t>(height) * width;
#pragma omp parallel for schedule(static)
  for (int j = 0; j < height; ++j) {
    for (int d = 0; d <= max_offset; ++d) {
      double* orow = out.data() + d * plane + static_cast<std::size_t>(j) * width;
      const int lo = step < 0 ? std::min(d, width) : 0;
      const int hi = step < 0 ? width : std::max(width - d, 0);
      for (int i = 0; i < width; ++i) orow[i] = (i >= lo && i < hi) ? 0.0 : fill;
      for (int c = 0; c < channels; ++c) {
        const double* arow = a.data() + c * plane + static_cast<std::size_t>(j) * width;
        const double* brow = b.data() + c * plane + static_cast<std::size_t>(j) * width + step * d;
#pragma omp simd
        for (int i = lo; i < hi; ++i) orow[i] += arow[i] * brow[i];
      }
      for (int i = lo; i < hi; ++i) orow[i] *= scale;
    }
  }
}

void epipolar_dot_backward(int channels, int height, int width, int max_offset, int step,
                           double scale, std::span<const double> grad_out,
                           std::span<const double> a, std::span<const double> b,
                           std::span<double> grad_a, std::span<double> grad_b) {
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  const bool want_a = !grad_a.empty(), want_b = !grad_b.empty();
#pragma omp parallel for schedule(static)
  for (int j = 0; j < height; ++j) {
    for (int d = 0; d <= max_offset; ++d) {
      const double* grow = grad_out.data() + d * plane + static_cast<std::size_t>(j) * width;
      const int lo = step < 0 ? std::min(d, width) : 0;
      const int hi = step < 0 ? width : std::max(width - d, 0);
      for (int c = 0; c < channels; ++c) {
        const std::size_t row = c * plane + static_cast<std::size_t>(j) * width;
        if (want_a) {
          const double* brow = b.data() + row + step * d;
          double* garow = grad_a.data() + row;
          for (int i = lo; i < hi; ++i) garow[i] += scale * grow[i] * brow[i];
        }
        if (want_b) {
          const double* arow = a.data() + row;
          double* gbrow = grad_b.data() + row + step * d;
          for (int i = lo; i < hi; ++i) gbrow[i] += scale * grow[i] * arow[i];
        }
      }
    }
  }
}

void epipolar_gather_forward(int channels, int height, int width, int max_offset, int step,
                             std::span<const double> weights, std::span<const double> values,
                             std::span<double> out) {
  const std::size_t plane = static_cast<std::size_t>(height) * width;
#pragma omp parallel for schedule(static)
  for (int j = 0; j < height; ++j) {
    for (int c = 0; c < channels; ++c) {
      const std::size_t row = c * plane + static_cast<std::size_t>(j) * width;
      double* orow = out.data() + row;
      std::fill(orow, orow + width, 0.0);
      for (int d = 0; d <= max_offset; ++d) {
        const int lo = step < 0 ? std::min(d, width) : 0;
        const int hi = step < 0 ? width : std::max(width - d, 0);
        const double* wrow = weights.data() + d * plane + static_cast<std::size_t>(j) * width;
        const double* vrow = values.data() + row + step * d;
#pragma omp simd
        for (int i = lo; i < hi; ++i) orow[i] += wrow[i] * vrow[i];
      }
    }
  }
}

void epipolar_gather_backward(int channels, int height, int width, int max_offset, int step,
                              std::span<const double> grad_out, std::span<const double> weights,
                              std::span<const double> values, std::span<double> grad_weights,
                              std::span<double> grad_values) {
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  const bool want_w = !grad_weights.empty(), want_v = !grad_values.empty();
#pragma omp parallel for schedule(static)
  for (int j = 0; j < height; ++j) {
    for (int d = 0; d <= max_offset; ++d) {
      const int lo = step < 0 ? std::min(d, width) : 0;
      const int hi = step < 0 ? width : std::max(width - d, 0);
      const std::size_t wrow_off = d * plane + static_cast<std::size_t>(j) * width;
      for (int c = 0; c < channels; ++c) {
        const std::size_t row = c * plane + static_cast<std::size_t>(j) * width;
        const double* grow = grad_out.data() + row;
        if (want_w) {
          const double* vrow = values.data() + row + step * d;
          double* gwrow = grad_weights.data() + wrow_off;
          for (int i = lo; i < hi; ++i) gwrow[i] += grow[i] * vrow[i];
        }
        if (want_v) {
          const double* wrow = weights.data() + wrow_off;
          double* gvrow = grad_values.data() + row + step * d;
          for (int i = lo; i < hi; ++i) gvrow[i] += wrow[i] * grow[i];
        }
      }
    }
  }
}

void warp_forward(int channels, int height, int width, std::span<const double> src,
                  std::span<const double> offset, std::span<double> out) {
  const std::size_t plane = static_cast<std::size_t>(height) * width;
#pragma omp parallel for schedule(static)
  for (int j = 0; j < height; ++j) {
    const double* orow_off = offset.data() + static_cast<std::size_t>(j) * width;
    for (int c = 0; c < channels; ++c) {
      const double* srow = src.data() + c * plane + static_cast<std::size_t>(j) * width;
      double* orow = out.data() + c * plane + static_cast<std::size_t>(j) * width;
      for (int i = 0; i < width; ++i) {
        const double x = i + orow_off[i];
        if (!(x > -1.0 && x < width)) {
          orow[i] = 0.0;
          continue;
        }
        const int k0 = static_cast<int>(std::floor(x));
        const double a = x - k0;
        double v = 0.0;
        if (k0 >= 0) v += (1.0 - a) * srow[k0];
        if (k0 + 1 < width) v += a * srow[k0 + 1];
        orow[i] = v;
      }
    }
  }
}

void warp_backward(int channels, int height, int width, std::span<const double> grad_out,
                   std::span<const double> src, std::span<const double> offset,
                   std::span<double> grad_src, std::span<double> grad_offset) {
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  const bool want_src = !grad_src.empty(), want_off = !grad_offset.empty();
#pragma omp parallel for schedule(static)
  for (int j = 0; j < height; ++j) {
    const double* orow_off = offset.data() + static_cast<std::size_t>(j) * width;
    for (int c = 0; c < channels; ++c) {
      const std::size_t row = c * plane + static_cast<std::size_t>(j) * width;
      const double* srow = src.data() + row;
      const double* grow = grad_out.data() + row;
      for (int i = 0; i < width; ++i) {
        const double x = i + orow_off[i];
        if (!(x > -1.0 && x < width)) continue;
        const int k0 = static_cast<int>(std::floor(x));
        const double a = x - k0;
        const double g = grow[i];
        const double s0 = k0 >= 0 ? srow[k0] : 0.0;
        const double s1 = k0 + 1 < width ? srow[k0 + 1] : 0.0;
        if (want_src) {
          if (k0 >= 0) grad_src[row + k0] += (1.0 - a) * g;
          if (k0 + 1 < width) grad_src[row + k0 + 1] += a * g;
        }
        if (want_off) grad_offset[static_cast<std::size_t>(j) * width + i] += g * (s1 - s0);
      }
    }
  }
}

void box3_forward(int channels, int height, int width, std::span<const double> in,
                  std::span<double> out) {
  const std::size_t plane = static_cast<std::size_t>(height) * width;
#pragma omp parallel for schedule(static)
  for (int c = 0; c < channels; ++c) {
    const double* p = in.data() + c * plane;
    double* o = out.data() + c * plane;
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        double acc = 0.0;
        for (int dy = -1; dy <= 1; ++dy) {
          const double* row = p + static_cast<std::size_t>(reflect(y + dy, height)) * width;
          for (int dx = -1; dx <= 1; ++dx) acc += row[reflect(x + dx, width)];
        }
        o[static_cast<std::size_t>(y) * width + x] = acc / 9.0;
      }
    }
  }
}

void box3_backward(int channels, int height, int width, std::span<const double> grad_out,
                   std::span<double> grad_in) {
  const std::size_t plane = static_cast<std::size_t>(height) * width;
#pragma omp parallel for schedule(static)
  for (int c = 0; c < channels; ++c) {
    const double* g = grad_out.data() + c * plane;
    double* gi = grad_in.data() + c * plane;
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const double v = g[static_cast<std::size_t>(y) * width + x] / 9.0;
        for (int dy = -1; dy <= 1; ++dy) {
          double* row = gi + static_cast<std::size_t>(reflect(y + dy, height)) * width;
          for (int dx = -1; dx <= 1; ++dx) row[reflect(x + dx, width)] += v;
        }
      }
    }
  }
}

void upsample_bilinear_forward(int channels, int height, int width, int factor,
                               std::span<const double> in, std::span<double> out) {
  const auto ty = lerp_table(height, factor);
  const auto tx = lerp_table(width, factor);
  const int Ho = height * factor, Wo = width * factor;
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  const std::size_t oplane = static_cast<std::size_t>(Ho) * Wo;
#pragma omp parallel for schedule(static)
  for (int c = 0; c < channels; ++c) {
    const double* p = in.data() + c * plane;
    double* o = out.data() + c * oplane;
    for (int oy = 0; oy < Ho; ++oy) {
      const Lerp ly = ty[static_cast<std::size_t>(oy)];
      const double* r0 = p + static_cast<std::size_t>(ly.lo) * width;
      const double* r1 = p + static_cast<std::size_t>(ly.hi) * width;
      for (int ox = 0; ox < Wo; ++ox) {
        const Lerp lx = tx[static_cast<std::size_t>(ox)];
        const double top = (1.0 - lx.frac) * r0[lx.lo] + lx.frac * r0[lx.hi];
        const double bot = (1.0 - lx.frac) * r1[lx.lo] + lx.frac * r1[lx.hi];
        o[static_cast<std::size_t>(oy) * Wo + ox] = (1.0 - ly.frac) * top + ly.frac * bot;
      }
    }
  }
}

void upsample_bilinear_backward(int channels, int height, int width, int factor,
                                std::span<const double> grad_out, std::span<double> grad_in) {
  const auto ty = lerp_table(height, factor);
  const auto tx = lerp_table(width, factor);
  const int Ho = height * factor, Wo = width * factor;
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  const std::size_t oplane = static_cast<std::size_t>(Ho) * Wo;
#pragma omp parallel for schedule(static)
  for (int c = 0; c < channels; ++c) {
    const double* g = grad_out.data() + c * oplane;
    double* gi = grad_in.data() + c * plane;
    for (int oy = 0; oy < Ho; ++oy) {
      const Lerp ly = ty[static_cast<std::size_t>(oy)];
      double* r0 = gi + static_cast<std::size_t>(ly.lo) * width;
      double* r1 = gi + static_cast<std::size_t>(ly.hi) * width;
      for (int ox = 0; ox < Wo; ++ox) {
        const Lerp lx = tx[static_cast<std::size_t>(ox)];
        const double v = g[static_cast<std::size_t>(oy) * Wo + ox];
        const double top = (1.0 - ly.frac) * v, bot = ly.frac * v;
        r0[lx.lo] += (1.0 - lx.frac) * top;
        r0[lx.hi] += lx.frac * top;
        r1[lx.lo] += (1.0 - lx.frac) * bot;
        r1[lx.hi] += lx.frac * bot;
      }
    }
  }
}

}  // namespace sca::kernels
