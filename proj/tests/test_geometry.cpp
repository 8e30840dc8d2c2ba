#include <doctest.h>

#include <cmath>

#include "reference.hpp"
#include "sca/errors.hpp"
#include "sca/geometry.hpp"
#include "sca/rng.hpp"
#include "sca/synth.hpp"

using namespace sca;

namespace {

DisparityMap map_from(int h, int w, std::vector<double> v, View view) {
  return DisparityMap::dense(Tensor(Shape{h, w}, std::move(v)), view);
}

}  // namespace

TEST_CASE("world points of matching pixels coincide") {
  CameraRig rig = default_rig(4, 16);
  // Constant disparity: left pixel i matches right pixel i - 4.
  const DisparityMap dl = DisparityMap::dense(Tensor(Shape{4, 16}, 4.0), View::Left);
  const DisparityMap dr = DisparityMap::dense(Tensor(Shape{4, 16}, 4.0), View::Right);
  const auto pl = disparity_to_world_points(dl, rig).points, pr = disparity_to_world_points(dr, rig).points;
  for (int j = 0; j < 4; ++j)
    for (int i = 4; i < 16; ++i)
      for (int c = 0; c < 3; ++c) CHECK(std::fabs(pl.at(c, j, i) - pr.at(c, j, i - 4)) < 1e-12);
  // depth = f b / D
  CHECK(pl.at(2, 0, 5) == doctest::Approx(100.0 * 0.5 / 4.0));
}

TEST_CASE("world points reject non-positive disparity at valid pixels") {
  const DisparityMap d = map_from(1, 2, {1.0, 0.0}, View::Left);
  CHECK_THROWS_AS(disparity_to_world_points(d, default_rig(1, 2)), InvalidArgument);
  DisparityMap masked = d;
  masked.valid_mask = Tensor(Shape{1, 2}, std::vector<double>{1, 0});
  CHECK_NOTHROW(disparity_to_world_points(masked, default_rig(1, 2)));
}

TEST_CASE("signed offset convention") {
  const Tensor d(Shape{1, 1}, 3.0);
  CHECK(signed_offset(d, View::Left).at(0) == -3.0);
  CHECK(signed_offset(d, View::Right).at(0) == 3.0);
}

TEST_CASE("warp reconstructs the left view from the right at constant disparity") {
  Rng rng(1);
  const int w = 12;
  Tensor right = rng.uniform_tensor({1, 1, w}, 0, 1);
  Tensor left(Shape{1, 1, w});
  for (int i = 0; i < w; ++i) left.mutable_data()[i] = i - 2 >= 0 ? right.at(0, 0, i - 2) : 0.0;
  const Tensor rec = backward_warp(right, signed_offset(Tensor(Shape{1, w}, 2.0), View::Left));
  for (int i = 2; i < w; ++i) CHECK(rec.at(0, 0, i) == left.at(0, 0, i));
}

TEST_CASE("occlusion mask on a foreground step") {
  // Left view: background D=2, foreground D=6 on columns 8..11.
  const int w = 16;
  std::vector<double> l(w, 2.0), r(w, 2.0);
  for (int i = 8; i < 12; ++i) l[static_cast<std::size_t>(i)] = 6.0;
  for (int i = 2; i < 6; ++i) r[static_cast<std::size_t>(i)] = 6.0;  // foreground seen at i - 6 in right
  const auto m = occlusion_mask(map_from(1, w, l, View::Left), map_from(1, w, r, View::Right)).mask;
  // columns 0,1 leave the image; background columns 4..7 land on foreground in the right view
  for (int i = 0; i < w; ++i) {
    const bool expect = !(i < 2 || (i >= 4 && i < 8));
    CHECK_MESSAGE((m.at(0, i) == 1.0) == expect, "col " << i);
  }
  CHECK_THROWS_AS(occlusion_mask(map_from(1, w, l, View::Left), map_from(1, w, r, View::Left)), InvalidArgument);
}

TEST_CASE("occlusion mask at a half-pixel depth edge") {
  // d=8.5 at column 10 lands at 1.5, between right columns showing 4 and 12;
  // their blend is 8, which a check on the warped disparity would accept
  const int w = 16;
  std::vector<double> l(w, 8.5), r(w, 12.0);
  r[0] = r[1] = 4.0;
  const auto m = occlusion_mask(map_from(1, w, l, View::Left), map_from(1, w, r, View::Right)).mask;
  CHECK(m.at(0, 10) == 0.0);
  // a tap with weight zero is not consulted
  std::vector<double> l2(w, 9.0), r2(w, 9.0);
  r2[2] = 100.0;
  const auto m2 = occlusion_mask(map_from(1, w, l2, View::Left), map_from(1, w, r2, View::Right)).mask;
  CHECK(m2.at(0, 10) == 1.0);
  CHECK(m2.at(0, 11) == 0.0);
}

TEST_CASE("EPE and D1-all fixtures") {
  // gt 100 -> threshold max(3, 5) = 5
  const DisparityMap gt = map_from(1, 6, {10, 10, 10, 100, 100, 100}, View::Left);
  const Tensor pred(Shape{1, 6}, std::vector<double>{13, 13.5, 7, 105, 105.5, 96});
  CHECK(epe(pred, gt) == doctest::Approx((3 + 3.5 + 3 + 5 + 5.5 + 4) / 6.0));
  // outliers: 13.5 (3.5 > 3) and 105.5 (5.5 > 5); exactly 3 and exactly 5 are not
  CHECK(d1_all(pred, gt) == doctest::Approx(100.0 * 2 / 6));
  CHECK(d1_all(pred, gt) == doctest::Approx(ref::d1_all(pred, gt)));
  CHECK(epe(pred, gt) == doctest::Approx(ref::epe(pred, gt)));
}

TEST_CASE("metrics skip invalid pixels and reject empty sets") {
  DisparityMap gt = map_from(1, 2, {10, 10}, View::Left);
  gt.valid_mask = Tensor(Shape{1, 2}, std::vector<double>{1, 0});
  const Tensor pred(Shape{1, 2}, std::vector<double>{11, 100});
  CHECK(epe(pred, gt) == 1.0);
  CHECK(d1_all(pred, gt) == 0.0);
  gt.valid_mask = Tensor(Shape{1, 2}, 0.0);
  CHECK_THROWS_AS(epe(pred, gt), UndefinedMetric);
  CHECK_THROWS_AS(d1_all(pred, gt), UndefinedMetric);
  CHECK_THROWS_AS(epe(Tensor(Shape{2, 1}), map_from(1, 2, {1, 1}, View::Left)), InvalidArgument);
}
