#include "reference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ref {

using sca::Shape;

namespace {

double get(const Tensor& t, int c, int j, int i) { return t.at(c, j, i); }

int reflect(int k, int n) { return k < 0 ? -k : (k >= n ? 2 * n - 2 - k : k); }

// Bilinear source coordinate with half-pixel centres and edge clamp.
void source_coord(int o, int factor, int extent, int& lo, int& hi, double& frac) {
  double s = (o + 0.5) / factor - 0.5;
  if (s < 0) s = 0;
  lo = std::min(static_cast<int>(std::floor(s)), extent - 1);
  hi = std::min(lo + 1, extent - 1);
  frac = s - lo;
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride, int padding) {
  const int ci = input.dim(0), h = input.dim(1), w = input.dim(2);
  const int co = weight.dim(0), kh = weight.dim(2), kw = weight.dim(3);
  const int ho = (h + 2 * padding - kh) / stride + 1, wo = (w + 2 * padding - kw) / stride + 1;
  Tensor out(Shape{co, ho, wo});
  auto o = out.mutable_data();
  for (int c = 0; c < co; ++c)
    for (int y = 0; y < ho; ++y)
      for (int x = 0; x < wo; ++x) {
        double acc = bias.defined() ? bias.at(static_cast<std::size_t>(c)) : 0.0;
        for (int k = 0; k < ci; ++k)
          for (int dy = 0; dy < kh; ++dy)
            for (int dx = 0; dx < kw; ++dx) {
              const int yy = y * stride + dy - padding, xx = x * stride + dx - padding;
              if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
              acc += weight.at(((static_cast<std::size_t>(c) * ci + k) * kh + dy) * kw + dx) * get(input, k, yy, xx);
            }
        o[(static_cast<std::size_t>(c) * ho + y) * wo + x] = acc;
      }
  return out;
}

Tensor warp(const Tensor& src, const Tensor& offset) {
  const bool planar = src.rank() == 2;
  const int c = planar ? 1 : src.dim(0);
  const int h = offset.dim(0), w = offset.dim(1);
  Tensor out(src.shape());
  auto o = out.mutable_data();
  for (int ch = 0; ch < c; ++ch)
    for (int j = 0; j < h; ++j)
      for (int i = 0; i < w; ++i) {
        const double pos = i + offset.at(j, i);
        double acc = 0.0;
        for (int k = 0; k < w; ++k) {
          const double wt = std::max(0.0, 1.0 - std::fabs(pos - k));
          if (wt > 0) acc += wt * src.at((static_cast<std::size_t>(ch) * h + j) * w + k);
        }
        o[(static_cast<std::size_t>(ch) * h + j) * w + i] = acc;
      }
  return out;
}

Tensor correlation(const Tensor& left, const Tensor& right, int d_max) {
  const int c = left.dim(0), h = left.dim(1), w = left.dim(2);
  Tensor out(Shape{d_max + 1, h, w});
  auto o = out.mutable_data();
  for (int d = 0; d <= d_max; ++d)
    for (int j = 0; j < h; ++j)
      for (int i = 0; i < w; ++i) {
        if (i - d < 0) continue;
        double acc = 0.0;
        for (int ch = 0; ch < c; ++ch) acc += get(left, ch, j, i) * get(right, ch, j, i - d);
        o[(static_cast<std::size_t>(d) * h + j) * w + i] = acc / c;
      }
  return out;
}

Tensor sca(const Tensor& other, const Tensor& query_source, const Tensor& key_source, const Tensor& w_query,
           const Tensor& w_key, int d_max, int step) {
  const int cv = other.dim(0), h = other.dim(1), w = other.dim(2);
  const int cin = query_source.dim(0), dout = w_query.dim(0);
  auto project = [&](const Tensor& m, const Tensor& x, int j, int i) {
    std::vector<double> v(static_cast<std::size_t>(dout), 0.0);
    for (int r = 0; r < dout; ++r)
      for (int k = 0; k < cin; ++k) v[static_cast<std::size_t>(r)] += m.at(static_cast<std::size_t>(r) * cin + k) * get(x, k, j, i);
    return v;
  };
  Tensor out(Shape{cv, h, w});
  auto o = out.mutable_data();
  for (int j = 0; j < h; ++j)
    for (int i = 0; i < w; ++i) {
      const auto q = project(w_query, query_source, j, i);
      std::vector<double> logit;
      std::vector<int> col;
      for (int d = 0; d <= d_max; ++d) {
        const int ii = i + step * d;
        if (ii < 0 || ii >= w) continue;
        const auto k = project(w_key, key_source, j, ii);
        double s = 0.0;
        for (int r = 0; r < dout; ++r) s += q[static_cast<std::size_t>(r)] * k[static_cast<std::size_t>(r)];
        logit.push_back(s);
        col.push_back(ii);
      }
      if (logit.empty()) continue;
      const double mx = *std::max_element(logit.begin(), logit.end());
      double z = 0.0;
      for (double& l : logit) z += (l = std::exp(l - mx));
      for (int c = 0; c < cv; ++c) {
        double acc = 0.0;
        for (std::size_t n = 0; n < col.size(); ++n) acc += logit[n] / z * get(other, c, j, col[n]);
        o[(static_cast<std::size_t>(c) * h + j) * w + i] = acc;
      }
    }
  return out;
}

Tensor ssim(const Tensor& a, const Tensor& b) {
  const int c = a.dim(0), h = a.dim(1), w = a.dim(2);
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  Tensor out(a.shape());
  auto o = out.mutable_data();
  for (int ch = 0; ch < c; ++ch)
    for (int j = 0; j < h; ++j)
      for (int i = 0; i < w; ++i) {
        double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const double x = get(a, ch, reflect(j + dy, h), reflect(i + dx, w));
            const double y = get(b, ch, reflect(j + dy, h), reflect(i + dx, w));
            sa += x, sb += y, saa += x * x, sbb += y * y, sab += x * y;
          }
        const double ma = sa / 9, mb = sb / 9;
        const double va = saa / 9 - ma * ma, vb = sbb / 9 - mb * mb, cov = sab / 9 - ma * mb;
        o[(static_cast<std::size_t>(ch) * h + j) * w + i] =
            (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      }
  return out;
}

Tensor upsample_bilinear(const Tensor& x, int factor) {
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor out(Shape{c, h * factor, w * factor});
  auto o = out.mutable_data();
  for (int ch = 0; ch < c; ++ch)
    for (int oy = 0; oy < h * factor; ++oy)
      for (int ox = 0; ox < w * factor; ++ox) {
        int y0, y1, x0, x1;
        double fy, fx;
        source_coord(oy, factor, h, y0, y1, fy);
        source_coord(ox, factor, w, x0, x1, fx);
        const double v = (1 - fy) * ((1 - fx) * get(x, ch, y0, x0) + fx * get(x, ch, y0, x1)) +
                         fy * ((1 - fx) * get(x, ch, y1, x0) + fx * get(x, ch, y1, x1));
        o[(static_cast<std::size_t>(ch) * h * factor + oy) * w * factor + ox] = v;
      }
  return out;
}

namespace {

double masked_term(const Tensor& target, const Tensor& other, const sca::DisparityMap& d,
                   const sca::OcclusionMask& m) {
  const int c = target.dim(0), h = target.dim(1), w = target.dim(2);
  const double sign = d.view == sca::View::Left ? -1.0 : 1.0;
  double num = 0, den = 0;
  for (int j = 0; j < h; ++j)
    for (int i = 0; i < w; ++i) {
      const double mk = m.mask.at(j, i);
      den += mk;
      if (mk == 0) continue;
      const double pos = i + sign * d.values.at(j, i);
      for (int ch = 0; ch < c; ++ch) {
        double warped = 0;
        for (int k = 0; k < w; ++k) warped += std::max(0.0, 1.0 - std::fabs(pos - k)) * get(other, ch, j, k);
        num += std::fabs(get(target, ch, j, i) - warped) * mk;
      }
    }
  return den > 0 ? num / den : 0.0;
}

}  // namespace

double stereo_consistency(const std::vector<std::array<Tensor, 2>>& features, const std::array<Tensor, 2>& images,
                          const std::array<sca::DisparityMap, 2>& disparity,
                          const std::array<sca::OcclusionMask, 2>& masks) {
  double total = 0;
  for (int b = 0; b < 2; ++b) total += masked_term(images[b], images[1 - b], disparity[b], masks[b]);
  for (const auto& f : features) {
    const int factor = images[0].dim(1) / f[0].dim(1);
    const Tensor up0 = upsample_bilinear(f[0], factor), up1 = upsample_bilinear(f[1], factor);
    total += masked_term(up0, up1, disparity[0], masks[0]);
    total += masked_term(up1, up0, disparity[1], masks[1]);
  }
  return total;
}

double epe(const Tensor& pred, const sca::DisparityMap& gt) {
  double acc = 0;
  int n = 0;
  for (int j = 0; j < gt.height(); ++j)
    for (int i = 0; i < gt.width(); ++i)
      if (gt.valid_mask.at(j, i) != 0) acc += std::fabs(pred.at(j, i) - gt.values.at(j, i)), ++n;
  return acc / n;
}

double d1_all(const Tensor& pred, const sca::DisparityMap& gt) {
  int bad = 0, n = 0;
  for (int j = 0; j < gt.height(); ++j)
    for (int i = 0; i < gt.width(); ++i) {
      if (gt.valid_mask.at(j, i) == 0) continue;
      const double g = gt.values.at(j, i), e = std::fabs(pred.at(j, i) - g);
      bad += (e > 3.0 && e > 0.05 * g) ? 1 : 0;
      ++n;
    }
  return 100.0 * bad / n;
}

double top_singular_value(const std::vector<double>& w, int rows, int cols) {
  // A = W W^T, symmetric [rows, rows].
  std::vector<double> a(static_cast<std::size_t>(rows) * rows, 0.0);
  for (int r = 0; r < rows; ++r)
    for (int s = 0; s < rows; ++s)
      for (int k = 0; k < cols; ++k)
        a[static_cast<std::size_t>(r) * rows + s] +=
            w[static_cast<std::size_t>(r) * cols + k] * w[static_cast<std::size_t>(s) * cols + k];
  auto at = [&](int r, int s) -> double& { return a[static_cast<std::size_t>(r) * rows + s]; };
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0;
    for (int p = 0; p < rows; ++p)
      for (int q = p + 1; q < rows; ++q) off += at(p, q) * at(p, q);
    if (off < 1e-30) break;
    for (int p = 0; p < rows; ++p)
      for (int q = p + 1; q < rows; ++q) {
        if (std::fabs(at(p, q)) < 1e-300) continue;
        const double theta = (at(q, q) - at(p, p)) / (2 * at(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::fabs(theta) + std::sqrt(theta * theta + 1));
        const double c = 1 / std::sqrt(t * t + 1), s = t * c;
        for (int k = 0; k < rows; ++k) {
          const double akp = at(k, p), akq = at(k, q);
          at(k, p) = c * akp - s * akq;
          at(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < rows; ++k) {
          const double apk = at(p, k), aqk = at(q, k);
          at(p, k) = c * apk - s * aqk;
          at(q, k) = s * apk + c * aqk;
        }
      }
  }
  double mx = 0;
  for (int r = 0; r < rows; ++r) mx = std::max(mx, at(r, r));
  return std::sqrt(mx);
}

std::vector<int> covisible(const sca::SceneSpec& spec, const std::vector<sca::SceneLayer>& layers, int view) {
  const int h = spec.height, w = spec.width;
  // Frontmost = largest disparity among layers covering layer-space (x, y).
  auto front = [&](int v, int col, int y) {
    int best = -1;
    for (std::size_t k = 0; k < layers.size(); ++k) {
      const double x = v == 0 ? col : col + layers[k].disparity;
      if (layers[k].covers(x, y) && (best < 0 || layers[k].disparity > layers[static_cast<std::size_t>(best)].disparity))
        best = static_cast<int>(k);
    }
    return best;
  };
  std::vector<int> out(static_cast<std::size_t>(h) * w, 0);
  for (int y = 0; y < h; ++y)
    for (int i = 0; i < w; ++i) {
      const int l = front(view, i, y);
      const double d = layers[static_cast<std::size_t>(l)].disparity;
      const double match = view == 0 ? i - d : i + d;
      // every interpolation tap of the match must be in the image and show l
      const int lo = static_cast<int>(std::floor(match)), hi = static_cast<int>(std::ceil(match));
      if (lo < 0 || hi >= w) continue;
      out[static_cast<std::size_t>(y) * w + i] = front(1 - view, lo, y) == l && front(1 - view, hi, y) == l ? 1 : 0;
    }
  return out;
}

}  // namespace ref
