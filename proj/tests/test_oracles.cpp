#include <doctest.h>

#include <cmath>
#include <limits>

#include "reference.hpp"
#include "sca/attention.hpp"
#include "sca/losses.hpp"
#include "sca/matcher.hpp"
#include "sca/ops.hpp"
#include "sca/rng.hpp"
#include "sca/spectral_norm.hpp"

using namespace sca;

namespace {

double max_abs_diff(const Tensor& a, const Tensor& b) {
  REQUIRE(a.shape() == b.shape());
  double m = 0;
  for (std::size_t k = 0; k < a.numel(); ++k) m = std::max(m, std::fabs(a.at(k) - b.at(k)));
  return m;
}

// Random shapes up to 8x16x32.
Shape random_chw(Rng& rng) { return {rng.uniform_int(1, 8), rng.uniform_int(2, 16), rng.uniform_int(4, 32)}; }

}  // namespace

TEST_CASE("conv2d matches nested loops") {
  Rng rng(1);
  for (int t = 0; t < 10; ++t) {
    const Shape s = random_chw(rng);
    const int co = rng.uniform_int(1, 6), k = 2 * rng.uniform_int(0, 1) + 1, stride = rng.uniform_int(1, 2);
    const Tensor x = rng.normal_tensor(s), w = rng.normal_tensor({co, s[0], k, k}), b = rng.normal_tensor({co});
    CHECK(max_abs_diff(conv2d(x, w, b, stride, k / 2), ref::conv2d(x, w, b, stride, k / 2)) <= 1e-12);
  }
}

TEST_CASE("backward_warp matches nested loops") {
  Rng rng(2);
  for (int t = 0; t < 10; ++t) {
    const Shape s = random_chw(rng);
    const Tensor x = rng.normal_tensor(s);
    const Tensor off = rng.uniform_tensor({s[1], s[2]}, -20.0, 20.0);
    CHECK(max_abs_diff(backward_warp(x, off), ref::warp(x, off)) <= 1e-12);
  }
  SUBCASE("integer offsets select columns exactly") {
    const Tensor x = rng.normal_tensor({2, 3, 10});
    const Tensor off(Shape{3, 10}, -3.0);
    const Tensor y = backward_warp(x, off);
    for (int c = 0; c < 2; ++c)
      for (int j = 0; j < 3; ++j)
        for (int i = 0; i < 10; ++i) CHECK(y.at(c, j, i) == (i >= 3 ? x.at(c, j, i - 3) : 0.0));
  }
}

TEST_CASE("correlation_1d matches nested loops") {
  Rng rng(3);
  for (int t = 0; t < 10; ++t) {
    const Shape s = random_chw(rng);
    const int dmax = rng.uniform_int(0, s[2] - 1);
    const Tensor l = rng.normal_tensor(s), r = rng.normal_tensor(s);
    CHECK(max_abs_diff(correlation_1d(l, r, dmax), ref::correlation(l, r, dmax)) <= 1e-12);
  }
}

TEST_CASE("sca_cross_attend matches nested loops") {
  Rng rng(4);
  for (int t = 0; t < 10; ++t) {
    const Shape s = random_chw(rng);
    const int din = s[0], dout = rng.uniform_int(1, 8);
    for (AttendDirection dir : {AttendDirection::LeftToRight, AttendDirection::RightToLeft}) {
      SCAParams p{rng.normal_tensor({dout, 2 * din}, 0.5), rng.normal_tensor({dout, 2 * din}, 0.5),
                  rng.uniform_int(0, s[2] - 1)};
      const Tensor other = rng.normal_tensor(s);
      const Tensor xq = rng.normal_tensor({2 * din, s[1], s[2]}), xk = rng.normal_tensor({2 * din, s[1], s[2]});
      const Tensor got = sca_cross_attend(other, xq, xk, p, dir);
      const Tensor want = ref::sca(other, xq, xk, p.w_query, p.w_key, p.d_max, candidate_step(dir));
      CHECK(max_abs_diff(got, want) <= 1e-12);
    }
  }
}

TEST_CASE("ssim matches windowed statistics") {
  Rng rng(5);
  for (int t = 0; t < 10; ++t) {
    Shape s = random_chw(rng);
    s[1] = std::max(s[1], 2);
    const Tensor a = rng.uniform_tensor(s, 0, 1), b = rng.uniform_tensor(s, 0, 1);
    CHECK(max_abs_diff(ssim(a, b), ref::ssim(a, b)) <= 1e-12);
  }
}

TEST_CASE("bilinear upsampling matches nested loops") {
  Rng rng(6);
  for (int f : {2, 4, 8}) {
    const Tensor x = rng.normal_tensor({3, 4, 5});
    CHECK(max_abs_diff(upsample_bilinear(x, f), ref::upsample_bilinear(x, f)) <= 1e-12);
  }
}

TEST_CASE("stereo_consistency_loss matches nested loops") {
  Rng rng(7);
  for (int t = 0; t < 5; ++t) {
    const int h = 16, w = 32, c = rng.uniform_int(1, 8);
    std::array<Tensor, 2> images{rng.uniform_tensor({3, h, w}, 0, 1), rng.uniform_tensor({3, h, w}, 0, 1)};
    std::array<DisparityMap, 2> disp{DisparityMap::dense(rng.uniform_tensor({h, w}, 0, 10), View::Left),
                                     DisparityMap::dense(rng.uniform_tensor({h, w}, 0, 10), View::Right)};
    std::array<OcclusionMask, 2> masks;
    for (int v = 0; v < 2; ++v) {
      Tensor m({h, w});
      for (double& x : m.mutable_data()) x = rng.uniform() < 0.7 ? 1.0 : 0.0;
      masks[v] = OcclusionMask{m, static_cast<View>(v)};
    }
    std::vector<ScaleFeatures> feats;
    std::vector<std::array<Tensor, 2>> plain;
    for (int n = 1; n <= 3; ++n) {
      const Shape s{c, h >> n, w >> n};
      std::array<Tensor, 2> f{rng.normal_tensor(s), rng.normal_tensor(s)};
      feats.push_back(ScaleFeatures{n, f});
      plain.push_back(f);
    }
    const double got = stereo_consistency_loss(feats, images, disp, masks).item();
    const double want = ref::stereo_consistency(plain, images, disp, masks);
    CHECK(std::fabs(got - want) <= 1e-12 * std::max(1.0, std::fabs(want)));
  }
}

TEST_CASE("spectral norm estimate converges to the top singular value") {
  Rng rng(8);
  for (int t = 0; t < 5; ++t) {
    const int co = rng.uniform_int(2, 8), ci = rng.uniform_int(1, 4);
    const Tensor w = rng.normal_tensor({co, ci, 3, 3});
    SpectralNormState st = make_spectral_norm_state(co, rng);
    power_iterate(w, st, 500);
    const double sigma = ref::top_singular_value(w.values(), co, ci * 9);
    CHECK(spectral_norm_estimate(w, st) == doctest::Approx(sigma).epsilon(1e-9));
    const Tensor wn = spectral_normalize(w, st, false);
    CHECK(ref::top_singular_value(wn.values(), co, ci * 9) == doctest::Approx(1.0).epsilon(1e-9));
  }
}
