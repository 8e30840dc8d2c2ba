#include <doctest.h>

#include <cmath>

#include "sca/errors.hpp"
#include "sca/losses.hpp"
#include "sca/ops.hpp"
#include "sca/rng.hpp"
#include "sca/synth.hpp"

using namespace sca;

namespace {

std::array<OcclusionMask, 2> masks_for(const StereoSample& s) {
  return {occlusion_mask(s.disparity[0], s.disparity[1]), occlusion_mask(s.disparity[1], s.disparity[0])};
}

StereoSample scene(std::uint64_t seed, bool half = true) {
  SceneSpec spec;
  spec.seed = seed;
  spec.height = 32;
  spec.width = 64;
  spec.half_pixel = half;
  return generate_scene(spec);
}

Tensor filled(Shape s, double v) { return Tensor(std::move(s), v); }

}  // namespace

TEST_CASE("hinge losses on constant logits") {
  // fake logits 0.5 and -3 on two scales, same for both views
  const ViewLogits fake{{{filled({1, 2, 2}, 0.5), filled({1, 1, 1}, -3.0)},
                         {filled({1, 2, 2}, 0.5), filled({1, 1, 1}, -3.0)}}};
  const ViewLogits src{{{filled({1, 2, 2}, -2.0), filled({1, 1, 1}, 0.0)},
                        {filled({1, 2, 2}, -2.0), filled({1, 1, 1}, 0.0)}}};
  const ViewLogits tgt{{{filled({1, 2, 2}, 2.0), filled({1, 1, 1}, 0.25)},
                        {filled({1, 2, 2}, 2.0), filled({1, 1, 1}, 0.25)}}};
  // generator: -(mean over scales of mean logit), summed over views
  CHECK(adv_loss_generator(fake).item() == doctest::Approx(2 * -((0.5 - 3.0) / 2)));
  // fake: max(0,1.5)=1.5, max(0,-2)=0 -> 0.75; source: 0, 1 -> 0.5; target: 0, 0.75 -> 0.375
  CHECK(adv_loss_discriminator(fake, src, tgt).item() == doctest::Approx(2 * (0.75 + 0.5 + 0.375)));
}

// Half-pixel disparities make the right-from-left warp a blend of two
// texture samples, so exactness only holds for integer scenes.
TEST_CASE("ground-truth pairs are stereo-consistent") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const StereoSample s = scene(seed, false);
    CHECK(image_consistency(s.images, s.disparity, masks_for(s)).item() < 1e-6);
  }
}

TEST_CASE("consistency detects a perturbed view") {
  const StereoSample s = scene(3, false);
  std::array<Tensor, 2> imgs = s.images;
  imgs[1] = add_scalar(imgs[1], 0.1);
  CHECK(image_consistency(imgs, s.disparity, masks_for(s)).item() == doctest::Approx(2 * 3 * 0.1).epsilon(1e-6));
}

TEST_CASE("empty mask terms are skipped") {
  const StereoSample s = scene(4);
  const OcclusionMask empty{Tensor(s.disparity[0].values.shape(), 0.0), View::Left};
  CHECK_FALSE(masked_warp_l1(s.images[0], s.images[1], s.disparity[0], empty).defined());
}

TEST_CASE("ssim properties") {
  Rng rng(1);
  const Tensor a = rng.uniform_tensor({3, 8, 8}, 0, 1);
  const Tensor same = ssim(a, a);
  for (double v : same.data()) CHECK(v == doctest::Approx(1.0));
  const Tensor b = rng.uniform_tensor({3, 8, 8}, 0, 1);
  const Tensor ab = ssim(a, b), ba = ssim(b, a);
  for (std::size_t k = 0; k < ab.numel(); ++k) {
    CHECK(ab.at(k) == doctest::Approx(ba.at(k)));
    CHECK(ab.at(k) <= 1.0 + 1e-12);
  }
}

TEST_CASE("reprojection loss vanishes at the true disparity on unoccluded scenes") {
  // one full-frame layer: nothing is occluded, only the border leaves the image
  SceneSpec spec;
  spec.seed = 5;
  spec.num_layers = 1;
  spec.height = 16;
  spec.width = 32;
  const StereoSample s = generate_scene(spec);
  const double at_gt = reprojection_loss(s.images, {s.disparity[0].values, s.disparity[1].values}, 0.85).item();
  const Tensor off = add_scalar(s.disparity[0].values, 1.5);
  const double off_gt = reprojection_loss(s.images, {off, add_scalar(s.disparity[1].values, 1.5)}, 0.85).item();
  CHECK(at_gt < off_gt);
  CHECK_THROWS_AS(reprojection_loss(s.images, {off, off}, 1.5), InvalidArgument);
}

TEST_CASE("disparity loss") {
  const DisparityMap gt = DisparityMap::dense(Tensor(Shape{1, 4}, 2.0), View::Left);
  const DisparityMap gtr = DisparityMap::dense(Tensor(Shape{1, 4}, 2.0), View::Right);
  const Tensor pred(Shape{1, 4}, std::vector<double>{2, 2.5, 4, 2});
  // smooth L1: 0, 0.125, 1.5, 0 -> mean 0.40625; right view exact
  CHECK(disparity_loss({pred, gtr.values}, {gt, gtr}).item() == doctest::Approx(0.40625));
  DisparityMap none = gt;
  none.valid_mask = Tensor(Shape{1, 4}, 0.0);
  CHECK_THROWS_AS(disparity_loss({pred, pred}, {none, gtr}), UndefinedMetric);
}

TEST_CASE("perceptual and feature-matching losses") {
  Rng rng(2);
  const PerceptualNet net;
  const Tensor a = rng.uniform_tensor({3, 16, 16}, 0, 1), b = rng.uniform_tensor({3, 16, 16}, 0, 1);
  CHECK(perceptual_loss(a, a, net.extractor()).item() == 0.0);
  CHECK(perceptual_loss(a, b, net.extractor()).item() > 0.0);
  CHECK(net(a).size() == 4);
  CHECK(PerceptualNet()(a)[3].values() == net(a)[3].values());
  // hook: a custom extractor is honoured
  const FeatureExtractor identity = [](const Tensor& x) { return std::vector<Tensor>{x}; };
  CHECK(perceptual_loss(a, b, identity).item() == doctest::Approx(mean(abs(sub(a, b))).item()));

  Tensor f = rng.normal_tensor({2, 3, 3});
  f.set_requires_grad(true);
  Tensor r = rng.normal_tensor({2, 3, 3});
  r.set_requires_grad(true);
  backward(feature_matching_loss({f}, {r}));
  CHECK(f.has_grad());
  CHECK_FALSE(r.has_grad());
  CHECK_THROWS_AS(feature_matching_loss({f}, {r, r}), InvalidArgument);
  CHECK_THROWS_AS(feature_matching_loss({}, {}), InvalidArgument);
}

TEST_CASE("full objective composition") {
  LossWeights w;
  LossComponents c;
  c.adv_g = Tensor::scalar(1);
  c.adv_c = Tensor::scalar(2);
  c.perc = Tensor::scalar(3);
  c.feat = Tensor::scalar(4);
  c.stereo = Tensor::scalar(5);
  c.disp = Tensor::scalar(6);
  c.reproj = Tensor::scalar(7);
  const Objective o = full_objective(c, w);
  CHECK(o.loss_g.item() == doctest::Approx(1 + 3 + 4 + 10 * 5));
  CHECK(o.loss_c.item() == doctest::Approx(2));
  CHECK(o.loss_e.item() == doctest::Approx(0.1 * 6 + 7));
  LossComponents partial;
  partial.reproj = Tensor::scalar(2);
  CHECK(full_objective(partial, w).loss_e.item() == doctest::Approx(2));
  w.stereo = -1;
  CHECK_THROWS_AS(full_objective(c, w), InvalidArgument);
}
