#pragma once

// Small correlation-based stereo matcher (DispNetC layout at toy size):
// siamese features at 1/2 resolution, a 1-D horizontal cost volume, an
// encoder-decoder over [cost volume, left features] and a softplus head.

#include "sca/layers.hpp"

namespace sca {

// out[d,j,i] = (1/C) sum_c F_l(c,j,i) F_r(c,j,i-d); zero when i-d < 0.
Tensor correlation_1d(const Tensor& left, const Tensor& right, int d_max);

struct MatcherConfig {
  int feature_channels = 16;
  int hidden_channels = 32;
  int d_max_full = 16;
  double initial_disparity = 6.0;  // softplus head starts near this value
};

class Matcher {
 public:
  Matcher(const MatcherConfig& config, Rng& rng);

  const MatcherConfig& config() const { return config_; }

  // Left-view disparity [H,W] (>= 0) for a rectified pair.
  Tensor predict(const Tensor& left, const Tensor& right) const;
  // Right-view disparity by mirroring: flip(predict(flip(right), flip(left))).
  Tensor predict_right(const Tensor& left, const Tensor& right) const;

  ParamList parameters() const;

 private:
  Tensor features(const Tensor& image) const;

  MatcherConfig config_;
  Conv2d f1_, f2_, f3_;
  Conv2d redirect_;
  Conv2d enc1_, enc2_;
  Conv2d dec1_, dec2_;
};

}  // namespace sca
