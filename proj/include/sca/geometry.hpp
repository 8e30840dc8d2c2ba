#pragma once

// Rectified-stereo geometry. Disparities are stored unsigned (positive
// pixels). A left-view pixel at column i matches right-view column i - D;
// a right-view pixel at column i matches left-view column i + D.

#include "sca/tensor.hpp"

namespace sca {

enum class View { Left, Right };

constexpr View other_view(View v) { return v == View::Left ? View::Right : View::Left; }
const char* view_name(View v);

struct CameraRig {
  double baseline_b = 0.5;  // meters
  double f_u = 100.0, f_v = 100.0;
  double c_u = 0.0, c_v = 0.0;

  void validate() const;
};

struct DisparityMap {
  Tensor values;      // [H,W], pixels
  View view = View::Left;
  Tensor valid_mask;  // [H,W] in {0,1}

  int height() const { return values.dim(0); }
  int width() const { return values.dim(1); }
  // All pixels valid.
  static DisparityMap dense(Tensor values, View view);
};

struct PointCloudImage {
  Tensor points;  // [3,H,W]: world x, y, z in meters
  View view = View::Left;
};

struct OcclusionMask {
  Tensor mask;  // [H,W] in {0,1}
  View view = View::Left;
};

// Camera-frame reprojection of each valid pixel's own (u, v), shifted into the
// world frame whose origin sits midway between the cameras (left: x - b/2,
// right: x + b/2). Invalid pixels map to (0, 0, 0).
PointCloudImage disparity_to_world_points(const DisparityMap& disparity, const CameraRig& rig);

// Signed horizontal sampling offset for warping into `target` view:
// -D for a left-view map, +D for a right-view map. Differentiable.
Tensor signed_offset(const Tensor& disparity, View target);

// Backward warp of `other` (features of view m, [C,H,W] or [H,W]) into view b
// with a signed offset map of view b.
Tensor backward_warp(const Tensor& other, const Tensor& offset_signed);

// Left-right consistency check: 1 where every interpolation tap of the match
// i + signed(D_b) lies inside the frame and has |D_b - D_m| < 1. Returns a
// constant (grad-free) mask. Invalid pixels of D_b are 0.
OcclusionMask occlusion_mask(const DisparityMap& target, const DisparityMap& other);

// Mean |pred - gt| over valid pixels.
double epe(const Tensor& pred, const DisparityMap& gt);
// Percentage of valid pixels with |pred - gt| > max(3, 0.05 gt).
double d1_all(const Tensor& pred, const DisparityMap& gt);

}  // namespace sca
