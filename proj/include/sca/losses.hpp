#pragma once

#include <array>
#include <functional>
#include <vector>

#include "sca/geometry.hpp"
#include "sca/layers.hpp"
#include "sca/translator.hpp"

namespace sca {

struct LossWeights {
  double perc = 1.0;
  double feat = 1.0;
  double stereo = 10.0;
  double disp = 0.1;
  double reproj = 1.0;
  double alpha = 0.85;  // SSIM mixing weight of the reprojection loss
  void validate() const;
};

// Per-view discriminator logits, one map per discriminator scale.
using ViewLogits = std::array<std::vector<Tensor>, 2>;

// -(sum over views of the scale-averaged mean logit).
Tensor adv_loss_generator(const ViewLogits& fake);
// Hinge terms, each a scale-averaged pixel mean summed over views:
//   max(0, 1 + C(fake)) + max(0, 1 + C(source)) + max(0, 1 - C(target)).
Tensor adv_loss_discriminator(const ViewLogits& fake, const ViewLogits& real_source,
                              const ViewLogits& real_target);

// sum over orderings (b,m) and scales n of
//   sum_ij |up_n(F^b) - W(up_n(F^m), D^b)|_1 M^b / sum_ij M^b
// The translated images enter as scale 0. A term with an empty mask is
// skipped.
Tensor stereo_consistency_loss(const std::vector<ScaleFeatures>& features,
                               const std::array<Tensor, 2>& images,
                               const std::array<DisparityMap, 2>& disparity,
                               const std::array<OcclusionMask, 2>& masks);
// The scale-0 (image) part of the above.
Tensor image_consistency(const std::array<Tensor, 2>& images,
                         const std::array<DisparityMap, 2>& disparity,
                         const std::array<OcclusionMask, 2>& masks);
// One masked warp term of the stereo-consistency loss; returns an undefined
// tensor when the mask is empty.
Tensor masked_warp_l1(const Tensor& target_view, const Tensor& other_view,
                      const DisparityMap& target_disparity, const OcclusionMask& mask);

// sum over views of the mean smooth_l1(pred - gt) over valid pixels.
Tensor disparity_loss(const std::array<Tensor, 2>& pred, const std::array<DisparityMap, 2>& gt);

// Per-pixel SSIM map from 3x3 box-filtered local statistics.
Tensor ssim(const Tensor& a, const Tensor& b);
constexpr double kSsimC1 = 0.01 * 0.01;
constexpr double kSsimC2 = 0.03 * 0.03;

// sum over orderings of the per-pixel mean of
//   (1 - alpha) |I^b - W(I^m, D^b)| + alpha/2 (1 - SSIM(I^b, W(I^m, D^b)))
// with pred[v] the unsigned disparity of view v.
Tensor reprojection_loss(const std::array<Tensor, 2>& images, const std::array<Tensor, 2>& pred,
                         double alpha);

// Frozen random conv features standing in for a pretrained network.
using FeatureExtractor = std::function<std::vector<Tensor>(const Tensor&)>;

class PerceptualNet {
 public:
  static constexpr std::uint64_t kDefaultSeed = 0x5ca1ab1e;
  explicit PerceptualNet(std::uint64_t seed = kDefaultSeed);
  std::vector<Tensor> operator()(const Tensor& image) const;
  FeatureExtractor extractor() const;

 private:
  std::vector<Conv2d> layers_;
};

// Mean over layers of the mean |phi(a) - phi(b)|.
Tensor perceptual_loss(const Tensor& a, const Tensor& b, const FeatureExtractor& features);
// Mean over layers of the mean |fake - real|; `real` is detached.
Tensor feature_matching_loss(const std::vector<Tensor>& fake_hidden,
                             const std::vector<Tensor>& real_hidden);

struct LossComponents {
  Tensor adv_g, adv_c, perc, feat, stereo, disp, reproj;  // undefined = 0
};

struct Objective {
  Tensor loss_g, loss_c, loss_e;
};

Objective full_objective(const LossComponents& c, const LossWeights& w);

}  // namespace sca
