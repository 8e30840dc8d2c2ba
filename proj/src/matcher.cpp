#include "sca/matcher.hpp"

#include <cmath>

#include "sca/errors.hpp"
#include "sca/ops.hpp"
#include "sca/translator.hpp"

namespace sca {

Tensor correlation_1d(const Tensor& left, const Tensor& right, int d_max) {
  if (left.rank() != 3 || left.shape() != right.shape()) {
    throw InvalidArgument("correlation_1d: shapes " + shape_string(left.shape()) + " and " +
                          shape_string(right.shape()));
  }
  if (d_max < 0 || d_max >= left.dim(2)) {
    throw InvalidArgument("correlation_1d: d_max " + std::to_string(d_max) + " outside [0, W)");
  }
  return epipolar_dot(left, right, d_max, -1, 1.0 / left.dim(0), 0.0);
}

namespace {

// Inverse of softplus, for the head bias.
double softplus_inverse(double y) { return y + std::log(-std::expm1(-y)); }

}  // namespace

Matcher::Matcher(const MatcherConfig& config, Rng& rng) : config_(config) {
  const int f = config_.feature_channels;
  const int h = config_.hidden_channels;
  const int corr = scale_d_max(config_.d_max_full, 1) + 1;
  const int redirect = f / 2;
  f1_ = Conv2d(3, f, 3, 1, rng, std::sqrt(2.0));
  f2_ = Conv2d(f, f, 3, 2, rng, std::sqrt(2.0));
  f3_ = Conv2d(f, f, 3, 1, rng, std::sqrt(2.0));
  redirect_ = Conv2d(f, redirect, 1, 1, rng, std::sqrt(2.0));
  enc1_ = Conv2d(corr + redirect, h, 3, 2, rng, std::sqrt(2.0));
  enc2_ = Conv2d(h, h, 3, 1, rng, std::sqrt(2.0));
  dec1_ = Conv2d(h + corr + redirect, 24, 3, 1, rng, std::sqrt(2.0));
  dec2_ = Conv2d(24, 1, 3, 1, rng, 0.1, softplus_inverse(config_.initial_disparity));
}

Tensor Matcher::features(const Tensor& image) const {
  Tensor x = leaky_relu(f1_(image), kLeakySlope);
  x = leaky_relu(f2_(x), kLeakySlope);
  return f3_(x);
}

Tensor Matcher::predict(const Tensor& left, const Tensor& right) const {
  if (left.rank() != 3 || left.dim(0) != 3 || left.shape() != right.shape()) {
    throw InvalidArgument("predict: expected two [3,H,W] images, got " + shape_string(left.shape()) +
                          " and " + shape_string(right.shape()));
  }
  if (left.dim(1) % 4 != 0 || left.dim(2) % 4 != 0) {
    throw InvalidArgument("predict: H and W must be divisible by 4");
  }
  const Tensor fl = features(left);
  const Tensor fr = features(right);
  const Tensor cost = leaky_relu(correlation_1d(fl, fr, scale_d_max(config_.d_max_full, 1)), kLeakySlope);
  const Tensor x0 = concat_channels({cost, leaky_relu(redirect_(fl), kLeakySlope)});
  Tensor e = leaky_relu(enc1_(x0), kLeakySlope);
  e = leaky_relu(enc2_(e), kLeakySlope);
  Tensor d = concat_channels({upsample_bilinear(e, 2), x0});
  d = dec2_(leaky_relu(dec1_(d), kLeakySlope));
  const Tensor full = softplus(upsample_bilinear(d, 2));
  return reshape(full, Shape{left.dim(1), left.dim(2)});
}

Tensor Matcher::predict_right(const Tensor& left, const Tensor& right) const {
  return flip_horizontal(predict(flip_horizontal(right), flip_horizontal(left)));
}

ParamList Matcher::parameters() const {
  ParamList out;
  f1_.collect(out, "E.feat1");
  f2_.collect(out, "E.feat2");
  f3_.collect(out, "E.feat3");
  redirect_.collect(out, "E.redirect");
  enc1_.collect(out, "E.enc1");
  enc2_.collect(out, "E.enc2");
  dec1_.collect(out, "E.dec1");
  dec2_.collect(out, "E.dec2");
  return out;
}

}  // namespace sca
