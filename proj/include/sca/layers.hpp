#pragma once

#include <string>
#include <vector>

#include "sca/rng.hpp"
#include "sca/tensor.hpp"

namespace sca {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};
using ParamList = std::vector<NamedTensor>;

std::vector<Tensor> tensors_of(const ParamList& params);

struct Conv2d {
  Tensor weight;  // [Co,Ci,k,k]
  Tensor bias;    // [Co]
  int stride = 1;
  int padding = 0;

  Conv2d() = default;
  // He-style normal init scaled by `gain`; bias filled with `bias_init`.
  Conv2d(int in_channels, int out_channels, int kernel, int stride, Rng& rng, double gain = 1.0,
         double bias_init = 0.0);

  int in_channels() const { return weight.dim(1); }
  int out_channels() const { return weight.dim(0); }
  Tensor operator()(const Tensor& x) const;
  // Uses an externally supplied (e.g. spectrally normalised) kernel.
  Tensor apply_with(const Tensor& x, const Tensor& kernel) const;
  void collect(ParamList& out, const std::string& prefix) const;
};

// Feature-conditioned denormalisation: instance_norm(x) * gamma(c) + beta(c),
// with gamma, beta produced by 3x3 convs over the conditioning features.
// gamma's bias starts at 1 so an all-zero gamma kernel gives unit scale.
struct Fade {
  Conv2d gamma, beta;
  bool enabled = true;

  Fade() = default;
  Fade(int channels, int cond_channels, Rng& rng);
  Tensor operator()(const Tensor& x, const Tensor& cond) const;
  void collect(ParamList& out, const std::string& prefix) const;
};

// Residual block whose two normalisation layers are FADE modulations driven
// by the content features: x + conv2(act(fade2(conv1(act(fade1(x)))))).
struct FadeResBlock {
  Fade fade1, fade2;
  Conv2d conv1, conv2;

  FadeResBlock() = default;
  FadeResBlock(int channels, int cond_channels, Rng& rng);
  Tensor operator()(const Tensor& x, const Tensor& cond) const;
  void collect(ParamList& out, const std::string& prefix) const;
};

constexpr double kNormEps = 1e-5;
constexpr double kLeakySlope = 0.2;

// Adaptive instance normalisation with a feature-level style: normalise each
// channel of `gen`, then rescale/shift by the per-channel std/mean of `style`.
Tensor fadain(const Tensor& gen, const Tensor& style);

}  // namespace sca
