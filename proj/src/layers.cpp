#include "sca/layers.hpp"

#include <cmath>

#include "sca/errors.hpp"
#include "sca/ops.hpp"

namespace sca {

std::vector<Tensor> tensors_of(const ParamList& params) {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(p.tensor);
  return out;
}

Conv2d::Conv2d(int in_channels, int out_channels, int kernel, int stride_, Rng& rng, double gain,
               double bias_init)
    : stride(stride_), padding(kernel / 2) {
  const double fan_in = static_cast<double>(in_channels) * kernel * kernel;
  weight = rng.normal_tensor(Shape{out_channels, in_channels, kernel, kernel}, gain / std::sqrt(fan_in));
  weight.set_requires_grad(true);
  bias = Tensor(Shape{out_channels}, bias_init);
  bias.set_requires_grad(true);
}

Tensor Conv2d::operator()(const Tensor& x) const { return conv2d(x, weight, bias, stride, padding); }

Tensor Conv2d::apply_with(const Tensor& x, const Tensor& kernel) const {
  return conv2d(x, kernel, bias, stride, padding);
}

void Conv2d::collect(ParamList& out, const std::string& prefix) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

Fade::Fade(int channels, int cond_channels, Rng& rng)
    : gamma(cond_channels, channels, 3, 1, rng, 0.5, 1.0), beta(cond_channels, channels, 3, 1, rng, 0.5, 0.0) {}

Tensor Fade::operator()(const Tensor& x, const Tensor& cond) const {
  if (!enabled) return x;
  if (x.dim(1) != cond.dim(1) || x.dim(2) != cond.dim(2)) {
    throw InvalidArgument("Fade: features " + shape_string(x.shape()) + " vs condition " +
                          shape_string(cond.shape()));
  }
  return add(mul(instance_norm(x, kNormEps), gamma(cond)), beta(cond));
}

void Fade::collect(ParamList& out, const std::string& prefix) const {
  gamma.collect(out, prefix + ".gamma");
  beta.collect(out, prefix + ".beta");
}

FadeResBlock::FadeResBlock(int channels, int cond_channels, Rng& rng)
    : fade1(channels, cond_channels, rng),
      fade2(channels, cond_channels, rng),
      conv1(channels, channels, 3, 1, rng, std::sqrt(2.0)),
      conv2(channels, channels, 3, 1, rng, 0.5) {}

Tensor FadeResBlock::operator()(const Tensor& x, const Tensor& cond) const {
  Tensor h = conv1(leaky_relu(fade1(x, cond), kLeakySlope));
  h = conv2(leaky_relu(fade2(h, cond), kLeakySlope));
  return add(x, h);
}

void FadeResBlock::collect(ParamList& out, const std::string& prefix) const {
  fade1.collect(out, prefix + ".fade1");
  fade2.collect(out, prefix + ".fade2");
  conv1.collect(out, prefix + ".conv1");
  conv2.collect(out, prefix + ".conv2");
}

Tensor fadain(const Tensor& gen, const Tensor& style) {
  if (gen.rank() != 3 || style.rank() != 3 || gen.dim(0) != style.dim(0)) {
    throw InvalidArgument("fadain: channel mismatch " + shape_string(gen.shape()) + " vs " +
                          shape_string(style.shape()));
  }
  if (gen.dim(1) != style.dim(1) || gen.dim(2) != style.dim(2)) {
    throw InvalidArgument("fadain: spatial mismatch " + shape_string(gen.shape()) + " vs " +
                          shape_string(style.shape()));
  }
  return modulate_channels(instance_norm(gen, kNormEps), channel_std(style, kNormEps),
                           channel_mean(style));
}

}  // namespace sca
