#include "sca/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "sca/errors.hpp"
#include "sca/ops.hpp"

namespace sca {

const char* view_name(View v) { return v == View::Left ? "left" : "right"; }

void CameraRig::validate() const {
  if (!(baseline_b > 0.0)) throw InvalidArgument("CameraRig: baseline must be > 0");
  if (!(f_u > 0.0) || !(f_v > 0.0)) throw InvalidArgument("CameraRig: focal lengths must be > 0");
}

DisparityMap DisparityMap::dense(Tensor values, View view) {
  if (values.rank() != 2) throw InvalidArgument("DisparityMap: values must be [H,W]");
  Tensor valid(values.shape(), 1.0);
  return DisparityMap{std::move(values), view, std::move(valid)};
}

namespace {

void check_map(const DisparityMap& d, const char* op) {
  if (d.values.rank() != 2 || d.valid_mask.shape() != d.values.shape()) {
    throw InvalidArgument(std::string(op) + ": disparity and valid mask must be matching [H,W]");
  }
}

void check_metric_inputs(const Tensor& pred, const DisparityMap& gt, const char* op) {
  check_map(gt, op);
  if (pred.shape() != gt.values.shape()) {
    throw InvalidArgument(std::string(op) + ": prediction " + shape_string(pred.shape()) +
                          " vs ground truth " + shape_string(gt.values.shape()));
  }
}

}  // namespace

PointCloudImage disparity_to_world_points(const DisparityMap& disparity, const CameraRig& rig) {
  rig.validate();
  check_map(disparity, "disparity_to_world_points");
  const int H = disparity.height(), W = disparity.width();
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  const double shift = disparity.view == View::Left ? -0.5 * rig.baseline_b : 0.5 * rig.baseline_b;
  std::vector<double> pts(3 * plane, 0.0);
  for (int j = 0; j < H; ++j)
    for (int i = 0; i < W; ++i) {
      const std::size_t k = static_cast<std::size_t>(j) * W + i;
      if (disparity.valid_mask.at(k) == 0.0) continue;
      const double d = disparity.values.at(k);
      if (!(d > 0.0)) {
        throw InvalidArgument("disparity_to_world_points: non-positive disparity at valid pixel (" +
                              std::to_string(i) + "," + std::to_string(j) + ")");
      }
      const double x = rig.baseline_b * (i - rig.c_u) / d;
      const double y = rig.f_u * rig.baseline_b * (j - rig.c_v) / (rig.f_v * d);
      const double z = rig.f_u * rig.baseline_b / d;
      pts[k] = x + shift;
      pts[plane + k] = y;
      pts[2 * plane + k] = z;
    }
  return PointCloudImage{Tensor(Shape{3, H, W}, std::move(pts)), disparity.view};
}

Tensor signed_offset(const Tensor& disparity, View target) {
  return target == View::Left ? neg(disparity) : disparity;
}

Tensor backward_warp(const Tensor& other, const Tensor& offset_signed) {
  return warp_horizontal(other, offset_signed);
}

OcclusionMask occlusion_mask(const DisparityMap& target, const DisparityMap& other) {
  check_map(target, "occlusion_mask");
  check_map(other, "occlusion_mask");
  if (target.view == other.view) throw InvalidArgument("occlusion_mask: maps must come from opposite views");
  if (target.values.shape() != other.values.shape()) throw InvalidArgument("occlusion_mask: shape mismatch");
  // The consistency test runs per interpolation tap instead of on the
  // blended W(D_m): at a depth edge the blend of two layers' disparities can
  // land within 1 px of D_b although neither tap shows that surface. Taps
  // outside the frame fail. For integer match positions this is the plain
  // left-right check.
  const int H = target.values.dim(0), W = target.width();
  const double sign = target.view == View::Left ? -1.0 : 1.0;
  const auto db = target.values.data();
  const auto dm = other.values.data();
  std::vector<double> m(target.values.numel());
  for (int j = 0; j < H; ++j)
    for (int i = 0; i < W; ++i) {
      const std::size_t k = static_cast<std::size_t>(j) * W + i;
      const double pos = i + sign * db[k];
      const double fl = std::floor(pos);
      bool ok = target.valid_mask.at(k) != 0.0;
      for (int t = 0; t < 2 && ok; ++t) {
        if (t == 1 && pos == fl) break;
        const double q = fl + t;
        ok = q >= 0.0 && q <= W - 1.0 &&
             std::fabs(db[k] - dm[static_cast<std::size_t>(j) * W + static_cast<std::size_t>(q)]) < 1.0;
      }
      m[k] = ok ? 1.0 : 0.0;
    }
  return OcclusionMask{Tensor(target.values.shape(), std::move(m)), target.view};
}

double epe(const Tensor& pred, const DisparityMap& gt) {
  check_metric_inputs(pred, gt, "epe");
  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < pred.numel(); ++k) {
    if (gt.valid_mask.at(k) == 0.0) continue;
    acc += std::fabs(pred.at(k) - gt.values.at(k));
    ++n;
  }
  if (n == 0) throw UndefinedMetric("epe: no valid pixels");
  return acc / static_cast<double>(n);
}

double d1_all(const Tensor& pred, const DisparityMap& gt) {
  check_metric_inputs(pred, gt, "d1_all");
  std::size_t outliers = 0, n = 0;
  for (std::size_t k = 0; k < pred.numel(); ++k) {
    if (gt.valid_mask.at(k) == 0.0) continue;
    const double g = gt.values.at(k);
    const double err = std::fabs(pred.at(k) - g);
    if (err > std::max(3.0, 0.05 * g)) ++outliers;
    ++n;
  }
  if (n == 0) throw UndefinedMetric("d1_all: no valid pixels");
  return 100.0 * static_cast<double>(outliers) / static_cast<double>(n);
}

}  // namespace sca
