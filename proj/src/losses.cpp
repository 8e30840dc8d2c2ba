#include "sca/losses.hpp"

#include <cmath>

#include "sca/errors.hpp"
#include "sca/ops.hpp"

namespace sca {

void LossWeights::validate() const {
  for (double w : {perc, feat, stereo, disp, reproj}) {
    if (!(w >= 0.0)) throw InvalidArgument("loss weights must be non-negative");
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidArgument("alpha must lie in [0, 1]");
}

namespace {

Tensor zero() { return Tensor::scalar(0.0); }

Tensor accumulate(const Tensor& acc, const Tensor& term) {
  if (!term.defined()) return acc;
  return acc.defined() ? add(acc, term) : term;
}

Tensor or_zero(const Tensor& t) { return t.defined() ? t : zero(); }

// Mean over discriminator scales of f(logits) averaged over pixels.
template <typename F>
Tensor scale_mean(const std::vector<Tensor>& logits, F f) {
  if (logits.empty()) throw InvalidArgument("adversarial loss: no logit maps");
  Tensor acc;
  for (const auto& l : logits) acc = accumulate(acc, mean(f(l)));
  return scale(acc, 1.0 / static_cast<double>(logits.size()));
}

Tensor hinge(const Tensor& logits, double sign) {
  return relu(add_scalar(scale(logits, sign), 1.0));
}

}  // namespace

Tensor adv_loss_generator(const ViewLogits& fake) {
  Tensor acc;
  for (const auto& view : fake) acc = accumulate(acc, scale_mean(view, [](const Tensor& t) { return t; }));
  return neg(acc);
}

Tensor adv_loss_discriminator(const ViewLogits& fake, const ViewLogits& real_source,
                              const ViewLogits& real_target) {
  Tensor acc;
  for (int v = 0; v < 2; ++v) {
    acc = accumulate(acc, scale_mean(fake[v], [](const Tensor& t) { return hinge(t, 1.0); }));
    acc = accumulate(acc, scale_mean(real_source[v], [](const Tensor& t) { return hinge(t, 1.0); }));
    acc = accumulate(acc, scale_mean(real_target[v], [](const Tensor& t) { return hinge(t, -1.0); }));
  }
  return acc;
}

Tensor masked_warp_l1(const Tensor& target_view, const Tensor& other_view,
                      const DisparityMap& target_disparity, const OcclusionMask& mask) {
  if (target_view.shape() != other_view.shape() || target_view.rank() != 3) {
    throw InvalidArgument("stereo consistency: view shapes " + shape_string(target_view.shape()) +
                          " and " + shape_string(other_view.shape()));
  }
  if (mask.mask.dim(0) != target_view.dim(1) || mask.mask.dim(1) != target_view.dim(2)) {
    throw InvalidArgument("stereo consistency: mask " + shape_string(mask.mask.shape()) +
                          " does not match features " + shape_string(target_view.shape()));
  }
  double count = 0.0;
  for (double m : mask.mask.data()) count += m;
  if (count == 0.0) return Tensor();
  const Tensor warped =
      backward_warp(other_view, signed_offset(target_disparity.values, target_disparity.view));
  const Tensor per_pixel = sum_channels(abs(sub(target_view, warped)));
  return scale(sum(mul(per_pixel, mask.mask)), 1.0 / count);
}

Tensor stereo_consistency_loss(const std::vector<ScaleFeatures>& features,
                               const std::array<Tensor, 2>& images,
                               const std::array<DisparityMap, 2>& disparity,
                               const std::array<OcclusionMask, 2>& masks) {
  Tensor acc = image_consistency(images, disparity, masks);
  for (const auto& level : features) {
    const int f = 1 << level.scale;
    const Tensor up_l = upsample_bilinear(level.views[0], f);
    const Tensor up_r = upsample_bilinear(level.views[1], f);
    acc = accumulate(acc, masked_warp_l1(up_l, up_r, disparity[0], masks[0]));
    acc = accumulate(acc, masked_warp_l1(up_r, up_l, disparity[1], masks[1]));
  }
  return or_zero(acc);
}

Tensor image_consistency(const std::array<Tensor, 2>& images,
                         const std::array<DisparityMap, 2>& disparity,
                         const std::array<OcclusionMask, 2>& masks) {
  for (int v = 0; v < 2; ++v) {
    if (disparity[v].view != static_cast<View>(v) || masks[v].view != static_cast<View>(v)) {
      throw InvalidArgument("stereo consistency: entries must be ordered [left, right]");
    }
  }
  Tensor acc = masked_warp_l1(images[0], images[1], disparity[0], masks[0]);
  acc = accumulate(acc, masked_warp_l1(images[1], images[0], disparity[1], masks[1]));
  return or_zero(acc);
}

Tensor disparity_loss(const std::array<Tensor, 2>& pred, const std::array<DisparityMap, 2>& gt) {
  Tensor acc;
  for (int v = 0; v < 2; ++v) {
    if (pred[v].shape() != gt[v].values.shape()) {
      throw InvalidArgument("disparity_loss: prediction " + shape_string(pred[v].shape()) +
                            " vs ground truth " + shape_string(gt[v].values.shape()));
    }
    double count = 0.0;
    for (double m : gt[v].valid_mask.data()) count += m;
    if (count == 0.0) throw UndefinedMetric("disparity_loss: no valid pixels");
    const Tensor err = smooth_l1(sub(pred[v], gt[v].values));
    acc = accumulate(acc, scale(sum(mul(err, gt[v].valid_mask)), 1.0 / count));
  }
  return acc;
}

Tensor ssim(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw InvalidArgument("ssim: shapes " + shape_string(a.shape()) + " and " + shape_string(b.shape()));
  }
  const Tensor mu_a = box_filter3(a);
  const Tensor mu_b = box_filter3(b);
  const Tensor mu_aa = mul(mu_a, mu_a);
  const Tensor mu_bb = mul(mu_b, mu_b);
  const Tensor mu_ab = mul(mu_a, mu_b);
  const Tensor var_a = sub(box_filter3(mul(a, a)), mu_aa);
  const Tensor var_b = sub(box_filter3(mul(b, b)), mu_bb);
  const Tensor cov = sub(box_filter3(mul(a, b)), mu_ab);
  const Tensor num = mul(add_scalar(scale(mu_ab, 2.0), kSsimC1), add_scalar(scale(cov, 2.0), kSsimC2));
  const Tensor den = mul(add_scalar(add(mu_aa, mu_bb), kSsimC1), add_scalar(add(var_a, var_b), kSsimC2));
  return div(num, den);
}

Tensor reprojection_loss(const std::array<Tensor, 2>& images, const std::array<Tensor, 2>& pred,
                         double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidArgument("reprojection_loss: alpha outside [0, 1]");
  Tensor acc;
  for (int b = 0; b < 2; ++b) {
    const int m = 1 - b;
    const Tensor warped = backward_warp(images[m], signed_offset(pred[b], static_cast<View>(b)));
    const Tensor l1 = abs(sub(images[b], warped));
    const Tensor dssim = add_scalar(neg(ssim(images[b], warped)), 1.0);
    const Tensor per_pixel = add(scale(l1, 1.0 - alpha), scale(dssim, alpha / 2.0));
    acc = accumulate(acc, mean(per_pixel));
  }
  return acc;
}

PerceptualNet::PerceptualNet(std::uint64_t seed) {
  Rng rng(seed);
  layers_.emplace_back(3, 8, 3, 1, rng, std::sqrt(2.0));
  layers_.emplace_back(8, 16, 3, 2, rng, std::sqrt(2.0));
  layers_.emplace_back(16, 16, 3, 1, rng, std::sqrt(2.0));
  layers_.emplace_back(16, 32, 3, 2, rng, std::sqrt(2.0));
  for (auto& l : layers_) {
    l.weight.set_requires_grad(false);
    l.bias.set_requires_grad(false);
  }
}

std::vector<Tensor> PerceptualNet::operator()(const Tensor& image) const {
  std::vector<Tensor> out;
  Tensor x = image;
  for (const auto& l : layers_) {
    x = leaky_relu(l(x), kLeakySlope);
    out.push_back(x);
  }
  return out;
}

FeatureExtractor PerceptualNet::extractor() const {
  return [this](const Tensor& image) { return (*this)(image); };
}

namespace {

Tensor layer_l1(const std::vector<Tensor>& a, const std::vector<Tensor>& b, const char* what) {
  if (a.size() != b.size() || a.empty()) {
    throw InvalidArgument(std::string(what) + ": layer counts " + std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()));
  }
  Tensor acc;
  for (std::size_t k = 0; k < a.size(); ++k) acc = accumulate(acc, mean(abs(sub(a[k], b[k]))));
  return scale(acc, 1.0 / static_cast<double>(a.size()));
}

}  // namespace

Tensor perceptual_loss(const Tensor& a, const Tensor& b, const FeatureExtractor& features) {
  return layer_l1(features(a), features(b), "perceptual_loss");
}

Tensor feature_matching_loss(const std::vector<Tensor>& fake_hidden,
                             const std::vector<Tensor>& real_hidden) {
  std::vector<Tensor> real;
  real.reserve(real_hidden.size());
  for (const auto& t : real_hidden) real.push_back(t.detach());
  return layer_l1(fake_hidden, real, "feature_matching_loss");
}

Objective full_objective(const LossComponents& c, const LossWeights& w) {
  w.validate();
  Objective o;
  o.loss_g = or_zero(c.adv_g);
  if (c.perc.defined() && w.perc != 0.0) o.loss_g = add(o.loss_g, scale(c.perc, w.perc));
  if (c.feat.defined() && w.feat != 0.0) o.loss_g = add(o.loss_g, scale(c.feat, w.feat));
  if (c.stereo.defined() && w.stereo != 0.0) o.loss_g = add(o.loss_g, scale(c.stereo, w.stereo));
  o.loss_c = or_zero(c.adv_c);
  o.loss_e = zero();
  if (c.disp.defined() && w.disp != 0.0) o.loss_e = add(o.loss_e, scale(c.disp, w.disp));
  if (c.reproj.defined() && w.reproj != 0.0) o.loss_e = add(o.loss_e, scale(c.reproj, w.reproj));
  return o;
}

}  // namespace sca
