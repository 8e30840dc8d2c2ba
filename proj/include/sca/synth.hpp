#pragma once

// Procedural rectified stereo scenes: fronto-parallel textured layers
// composited back to front, with exact disparities for both views.
//
// Textures are piecewise linear along x with knots at half-integer columns,
// so a backward warp by a half-pixel disparity reproduces a view exactly
// wherever both interpolation taps see the same layer.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "sca/geometry.hpp"

namespace sca {

enum class Domain { Source, Target };
const char* domain_name(Domain d);
Domain parse_domain(const std::string& s);

struct SceneSpec {
  std::uint64_t seed = 0;
  int num_layers = 3;  // including the full-frame background
  double d_min = 2.0;
  double d_max_scene = 14.0;
  Domain domain = Domain::Source;
  int height = 64;
  int width = 128;
  bool half_pixel = true;  // allow disparities on a 0.5 px grid
  double d_max_full = 16.0;
  void validate() const;
};

struct StereoSample {
  std::array<Tensor, 2> images;  // [3,H,W] in [0,1], [left, right]
  std::array<DisparityMap, 2> disparity;
  CameraRig rig;
};

struct SceneLayer {
  double disparity = 0.0;
  bool ellipse = false;
  bool full_frame = false;
  double cx = 0, cy = 0, rx = 0, ry = 0;  // in left-view pixel coordinates
  bool covers(double x, double y) const;
};

// Per-view index of the visible layer at each pixel, [H*W] row-major.
struct SceneLayout {
  std::vector<SceneLayer> layers;  // back to front
  std::array<std::vector<int>, 2> visible;
};

CameraRig default_rig(int height, int width);

StereoSample generate_scene(const SceneSpec& spec);
// Geometry only (no texture), for oracles.
SceneLayout scene_layout(const SceneSpec& spec);

// Gamma 1.4, channel gains (0.9, 1.0, 1.15), additive N(0, 0.02^2) noise
// from `noise_seed`, clamped to [0,1].
Tensor apply_target_style(const Tensor& image, std::uint64_t noise_seed);

}  // namespace sca
