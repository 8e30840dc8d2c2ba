#include "sca/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <set>

#include "sca/attention.hpp"
#include "sca/errors.hpp"
#include "sca/geometry.hpp"
#include "sca/losses.hpp"
#include "sca/matcher.hpp"
#include "sca/ops.hpp"
#include "sca/rng.hpp"
#include "sca/spectral_norm.hpp"
#include "sca/synth.hpp"
#include "sca/translator.hpp"

namespace sca {

GradcheckResult check_gradient(const ScalarFn& f, const std::vector<Tensor>& inputs, double h,
                               std::size_t max_entries, std::uint64_t sample_seed) {
  std::vector<Tensor> in = inputs;
  for (auto& t : in) {
    t.zero_grad();
    t.set_requires_grad(true);
  }
  const Tensor loss = f(in);
  if (loss.numel() != 1) throw InvalidArgument("check_gradient: function must return a scalar");
  backward(loss);

  Rng pick(sample_seed);
  double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
  GradcheckResult r;
  NoGradGuard ng;
  for (auto& t : in) {
    const std::vector<double> analytic =
        t.has_grad() ? std::vector<double>(t.grad().begin(), t.grad().end()) : std::vector<double>(t.numel(), 0.0);
    std::vector<std::size_t> idx(t.numel());
    std::iota(idx.begin(), idx.end(), 0);
    if (max_entries > 0 && idx.size() > max_entries) {
      std::shuffle(idx.begin(), idx.end(), pick.engine());
      idx.resize(max_entries);
    }
    auto d = t.mutable_data();
    for (std::size_t k : idx) {
      const double x0 = d[k];
      d[k] = x0 + h;
      const double fp = f(in).item();
      d[k] = x0 - h;
      const double fm = f(in).item();
      d[k] = x0;
      const double num = (fp - fm) / (2.0 * h);
      diff2 += (analytic[k] - num) * (analytic[k] - num);
      a2 += analytic[k] * analytic[k];
      n2 += num * num;
      ++r.checked;
    }
    t.zero_grad();
  }
  r.relative_error = std::sqrt(diff2) / std::max({std::sqrt(a2), std::sqrt(n2), 1e-10});
  return r;
}

bool GradcheckReport::all_passed() const {
  return !cases.empty() && std::all_of(cases.begin(), cases.end(), [](const auto& c) { return c.passed; });
}

std::size_t GradcheckReport::op_count() const {
  std::set<std::string> ops;
  for (const auto& c : cases) ops.insert(c.op);
  return ops.size();
}

std::string GradcheckReport::format() const {
  std::string out;
  char line[256];
  for (const auto& c : cases) {
    std::snprintf(line, sizeof line, "%-28s #%d %-18s rel_err=%.3e %s\n", c.op.c_str(), c.instance,
                  c.shape.c_str(), c.relative_error, c.passed ? "ok" : "FAIL");
    out += line;
  }
  std::snprintf(line, sizeof line, "%zu ops, %zu cases, tolerance %.1e: %s\n", op_count(), cases.size(), tolerance,
                all_passed() ? "all passed" : "FAILURES");
  out += line;
  return out;
}

namespace {

struct Instance {
  ScalarFn fn;
  std::vector<Tensor> inputs;
  std::string shape;
  std::size_t max_entries = 0;
};

using Builder = std::function<Instance(Rng&, int)>;

// Fixed random projection turning any tensor into a scalar.
Tensor project(const Tensor& out, std::uint64_t seed) {
  Rng r(seed);
  return sum(mul(out, r.uniform_tensor(out.shape(), -1.0, 1.0)));
}

// Values bounded away from zero, for ops with a kink at the origin.
Tensor away_from_zero(Rng& rng, Shape s) {
  Tensor t(std::move(s));
  for (double& v : t.mutable_data()) v = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.05, 1.0);
  return t;
}

Shape small_chw(Rng& rng) { return {rng.uniform_int(1, 3), rng.uniform_int(3, 6), rng.uniform_int(4, 8)}; }

std::uint64_t proj_seed(Rng& rng) { return rng.engine()(); }

DisparityMap random_disparity(Rng& rng, int h, int w, View v, double lo, double hi) {
  return DisparityMap::dense(rng.uniform_tensor({h, w}, lo, hi), v);
}

std::vector<std::pair<std::string, Builder>> registry() {
  std::vector<std::pair<std::string, Builder>> r;

  r.emplace_back("add_sub_mul", [](Rng& rng, int) {
    const Shape s = small_chw(rng);
    const auto ps = proj_seed(rng);
    return Instance{[ps](const std::vector<Tensor>& x) { return project(mul(add(x[0], x[1]), sub(x[0], x[1])), ps); },
                    {rng.normal_tensor(s), rng.normal_tensor(s)}, shape_string(s)};
  });
  r.emplace_back("div", [](Rng& rng, int) {
    const Shape s = small_chw(rng);
    const auto ps = proj_seed(rng);
    Tensor b = rng.uniform_tensor(s, 0.5, 2.0);
    return Instance{[ps](const std::vector<Tensor>& x) { return project(div(x[0], x[1]), ps); },
                    {rng.normal_tensor(s), b}, shape_string(s)};
  });
  r.emplace_back("abs", [](Rng& rng, int) {
    const Shape s = small_chw(rng);
    const auto ps = proj_seed(rng);
    return Instance{[ps](const std::vector<Tensor>& x) { return project(abs(x[0]), ps); }, {away_from_zero(rng, s)},
                    shape_string(s)};
  });
  r.emplace_back("leaky_relu", [](Rng& rng, int) {
    const Shape s = small_chw(rng);
    const auto ps = proj_seed(rng);
    return Instance{[ps](const std::vector<Tensor>& x) { return project(leaky_relu(x[0], 0.2), ps); },
                    {away_from_zero(rng, s)}, shape_string(s)};
  });
  r.emplace_back("tanh_softplus", [](Rng& rng, int) {
    const Shape s = small_chw(rng);
    const auto ps = proj_seed(rng);
    return Instance{[ps](const std::vector<Tensor>& x) { return add(project(tanh(x[0]), ps), project(softplus(x[0]), ps + 1)); },
                    {rng.normal_tensor(s, 2.0)}, shape_string(s)};
  });
  r.emplace_back("smooth_l1", [](Rng& rng, int) {
    const Shape s = small_chw(rng);
    const auto ps = proj_seed(rng);
    return Instance{[ps](const std::vector<Tensor>& x) { return project(smooth_l1(x[0]), ps); },
                    {rng.uniform_tensor(s, -3.0, 3.0)}, shape_string(s)};
  });
  r.emplace_back("matmul", [](Rng& rng, int) {
    const int m = rng.uniform_int(1, 5), k = rng.uniform_int(1, 5), n = rng.uniform_int(1, 5);
    const auto ps = proj_seed(rng);
    return Instance{[ps](const std::vector<Tensor>& x) { return project(matmul(x[0], x[1]), ps); },
                    {rng.normal_tensor({m, k}), rng.normal_tensor({k, n})},
                    shape_string({m, k}) + "x" + shape_string({k, n})};
  });
  r.emplace_back("sum_mean", [](Rng& rng, int) {
    const Shape s = small_chw(rng);
    return Instance{[](const std::vector<Tensor>& x) { return add(mean(mul(x[0], x[0])), scale(sum(x[0]), 0.3)); },
                    {rng.normal_tensor(s)}, shape_string(s)};
  });
  r.emplace_back("conv2d", [](Rng& rng, int inst) {
    static const int cfg[3][7] = {{2, 5, 6, 3, 3, 1, 1}, {3, 7, 8, 2, 3, 2, 1}, {1, 6, 6, 2, 1, 1, 0}};
    const int* c = cfg[inst % 3];
    const auto ps = proj_seed(rng);
    const int stride = c[5], pad = c[6];
    return Instance{[=](const std::vector<Tensor>& x) { return project(conv2d(x[0], x[1], x[2], stride, pad), ps); },
                    {rng.normal_tensor({c[0], c[1], c[2]}), rng.normal_tensor({c[3], c[0], c[4], c[4]}),
                     rng.normal_tensor({c[3]})},
                    shape_string({c[0], c[1], c[2]}) + " k" + std::to_string(c[4]) + " s" + std::to_string(stride)};
  });
  r.emplace_back("softmax", [](Rng& rng, int inst) {
    const Shape s = inst == 0 ? Shape{5} : small_chw(rng);
    const int axis = inst == 0 ? 0 : rng.uniform_int(0, 2);
    const auto ps = proj_seed(rng);
    return Instance{[=](const std::vector<Tensor>& x) { return project(softmax(x[0], axis), ps); },
                    {rng.normal_tensor(s, 2.0)}, shape_string(s) + " ax" + std::to_string(axis)};
  });
  r.emplace_back("instance_norm_stats", [](Rng& rng, int) {
    const Shape s = small_chw(rng);
    const auto ps = proj_seed(rng);
    return Instance{[ps](const std::vector<Tensor>& x) {
                      return add(project(instance_norm(x[0], 1e-5), ps),
                                 add(project(channel_mean(x[0]), ps + 1), project(channel_std(x[0], 1e-5), ps + 2)));
                    },
                    {rng.normal_tensor(s)}, shape_string(s)};
  });
  r.emplace_back("box_filter3", [](Rng& rng, int) {
    const Shape s = small_chw(rng);
    const auto ps = proj_seed(rng);
    return Instance{[ps](const std::vector<Tensor>& x) { return project(box_filter3(x[0]), ps); },
                    {rng.normal_tensor(s)}, shape_string(s)};
  });
  r.emplace_back("upsample_nearest2", [](Rng& rng, int) {
    const Shape s = small_chw(rng);
    const auto ps = proj_seed(rng);
    return Instance{[ps](const std::vector<Tensor>& x) { return project(upsample_nearest2(x[0]), ps); },
                    {rng.normal_tensor(s)}, shape_string(s)};
  });
  r.emplace_back("upsample_bilinear", [](Rng& rng, int inst) {
    const Shape s = small_chw(rng);
    const int f = inst == 2 ? 4 : 2;
    const auto ps = proj_seed(rng);
    return Instance{[=](const std::vector<Tensor>& x) { return project(upsample_bilinear(x[0], f), ps); },
                    {rng.normal_tensor(s)}, shape_string(s) + " x" + std::to_string(f)};
  });
  r.emplace_back("avg_pool2", [](Rng& rng, int) {
    const Shape s{rng.uniform_int(1, 3), 2 * rng.uniform_int(1, 3), 2 * rng.uniform_int(2, 4)};
    const auto ps = proj_seed(rng);
    return Instance{[ps](const std::vector<Tensor>& x) { return project(avg_pool2(x[0]), ps); },
                    {rng.normal_tensor(s)}, shape_string(s)};
  });
  r.emplace_back("concat_slice_flip", [](Rng& rng, int) {
    const Shape s = small_chw(rng);
    Shape s2 = s;
    s2[0] = rng.uniform_int(1, 3);
    const auto ps = proj_seed(rng);
    return Instance{[ps](const std::vector<Tensor>& x) {
                      const Tensor c = concat_channels({x[0], x[1]});
                      return project(flip_horizontal(slice_channels(c, 1, c.dim(0))), ps);
                    },
                    {rng.normal_tensor(s), rng.normal_tensor(s2)}, shape_string(s)};
  });
  r.emplace_back("backward_warp", [](Rng& rng, int) {
    const Shape s = small_chw(rng);
    const auto ps = proj_seed(rng);
    return Instance{[ps](const std::vector<Tensor>& x) { return project(backward_warp(x[0], x[1]), ps); },
                    {rng.normal_tensor(s), rng.uniform_tensor({s[1], s[2]}, -3.9, 1.9)}, shape_string(s)};
  });
  r.emplace_back("correlation_1d", [](Rng& rng, int) {
    const Shape s = small_chw(rng);
    const int d = rng.uniform_int(0, s[2] - 1);
    const auto ps = proj_seed(rng);
    return Instance{[=](const std::vector<Tensor>& x) { return project(correlation_1d(x[0], x[1], d), ps); },
                    {rng.normal_tensor(s), rng.normal_tensor(s)}, shape_string(s) + " d" + std::to_string(d)};
  });
  r.emplace_back("epipolar_gather", [](Rng& rng, int inst) {
    const Shape s = small_chw(rng);
    const int d = rng.uniform_int(0, s[2] - 1), step = inst % 2 ? 1 : -1;
    const auto ps = proj_seed(rng);
    return Instance{[=](const std::vector<Tensor>& x) { return project(epipolar_gather(x[0], x[1], d, step), ps); },
                    {rng.normal_tensor({d + 1, s[1], s[2]}), rng.normal_tensor(s)}, shape_string(s)};
  });
  r.emplace_back("sca_cross_attend", [](Rng& rng, int inst) {
    const int din = rng.uniform_int(1, 3), dout = rng.uniform_int(1, 3), h = rng.uniform_int(2, 4), w = rng.uniform_int(4, 7);
    const int d = rng.uniform_int(0, w - 1);
    const AttendDirection dir = inst % 2 ? AttendDirection::RightToLeft : AttendDirection::LeftToRight;
    const auto ps = proj_seed(rng);
    return Instance{[=](const std::vector<Tensor>& x) {
                      SCAParams p{x[3], x[4], d};
                      return project(sca_cross_attend(x[0], x[1], x[2], p, dir), ps);
                    },
                    {rng.normal_tensor({din, h, w}), rng.normal_tensor({2 * din, h, w}), rng.normal_tensor({2 * din, h, w}),
                     rng.normal_tensor({dout, 2 * din}), rng.normal_tensor({dout, 2 * din})},
                    shape_string({din, h, w}) + " d" + std::to_string(d)};
  });
  r.emplace_back("sca_block", [](Rng& rng, int) {
    auto block = std::make_shared<SCABlock>(2, 3, rng.uniform_int(0, 3), rng);
    std::array<Tensor, 2> gen{rng.normal_tensor({2, 4, 6}), rng.normal_tensor({2, 4, 6})};
    std::array<Tensor, 2> content{rng.normal_tensor({2, 4, 6}), rng.normal_tensor({2, 4, 6})};
    const auto ps = proj_seed(rng);
    return Instance{[=](const std::vector<Tensor>&) {
                      const auto out = (*block)(gen, content);
                      return add(project(out[0], ps), project(out[1], ps + 1));
                    },
                    {block->attention.w_query, block->attention.w_key, gen[1]}, "[2,4,6]"};
  });
  r.emplace_back("fadain", [](Rng& rng, int) {
    const Shape s = small_chw(rng);
    const auto ps = proj_seed(rng);
    return Instance{[ps](const std::vector<Tensor>& x) { return project(fadain(x[0], x[1]), ps); },
                    {rng.normal_tensor(s), rng.normal_tensor(s)}, shape_string(s)};
  });
  r.emplace_back("fade", [](Rng& rng, int) {
    const Shape s = small_chw(rng);
    auto fade = std::make_shared<Fade>(s[0], 2, rng);
    const Tensor x = rng.normal_tensor(s);
    const Tensor cond = rng.normal_tensor({2, s[1], s[2]});
    const auto ps = proj_seed(rng);
    return Instance{[=](const std::vector<Tensor>&) { return project((*fade)(x, cond), ps); },
                    {fade->gamma.weight, fade->beta.weight, fade->gamma.bias, x, cond}, shape_string(s)};
  });
  r.emplace_back("fade_resblock", [](Rng& rng, int) {
    const Shape s{2, rng.uniform_int(3, 5), rng.uniform_int(4, 6)};
    auto block = std::make_shared<FadeResBlock>(2, 2, rng);
    const Tensor x = rng.normal_tensor(s);
    const Tensor cond = rng.normal_tensor(s);
    const auto ps = proj_seed(rng);
    return Instance{[=](const std::vector<Tensor>&) { return project((*block)(x, cond), ps); },
                    {block->fade1.gamma.weight, block->fade2.beta.weight, block->conv1.weight, x}, shape_string(s)};
  });
  r.emplace_back("spectral_normalize", [](Rng& rng, int) {
    const Shape s{rng.uniform_int(2, 4), rng.uniform_int(1, 3), 3, 3};
    const Tensor w0 = rng.normal_tensor(s);
    auto state = std::make_shared<SpectralNormState>(make_spectral_norm_state(s[0], rng));
    power_iterate(w0, *state, 50);
    const auto ps = proj_seed(rng);
    return Instance{[=](const std::vector<Tensor>& x) { return project(spectral_normalize(x[0], *state, false), ps); },
                    {w0}, shape_string(s)};
  });
  r.emplace_back("adv_loss_generator", [](Rng& rng, int) {
    const int h = rng.uniform_int(2, 4), w = rng.uniform_int(2, 5);
    return Instance{[](const std::vector<Tensor>& x) { return adv_loss_generator({{{x[0], x[1]}, {x[2], x[3]}}}); },
                    {rng.normal_tensor({1, h, w}), rng.normal_tensor({1, h / 2 + 1, w}), rng.normal_tensor({1, h, w}),
                     rng.normal_tensor({1, h / 2 + 1, w})},
                    shape_string({1, h, w})};
  });
  r.emplace_back("adv_loss_discriminator", [](Rng& rng, int) {
    const int h = rng.uniform_int(2, 4), w = rng.uniform_int(2, 5);
    std::vector<Tensor> in;
    for (int k = 0; k < 6; ++k) in.push_back(rng.normal_tensor({1, h, w}, 2.0));
    return Instance{[](const std::vector<Tensor>& x) {
                      return adv_loss_discriminator({{{x[0]}, {x[1]}}}, {{{x[2]}, {x[3]}}}, {{{x[4]}, {x[5]}}});
                    },
                    in, shape_string({1, h, w})};
  });
  r.emplace_back("stereo_consistency_loss", [](Rng& rng, int) {
    const int h = 4, w = 16;
    std::array<DisparityMap, 2> disp{random_disparity(rng, h, w, View::Left, 0.2, 3.8),
                                     random_disparity(rng, h, w, View::Right, 0.2, 3.8)};
    std::array<OcclusionMask, 2> masks{occlusion_mask(disp[0], disp[1]), occlusion_mask(disp[1], disp[0])};
    return Instance{[=](const std::vector<Tensor>& x) {
                      std::vector<ScaleFeatures> f{{1, {x[2], x[3]}}};
                      return stereo_consistency_loss(f, {x[0], x[1]}, disp, masks);
                    },
                    {rng.uniform_tensor({3, h, w}, 0, 1), rng.uniform_tensor({3, h, w}, 0, 1),
                     rng.normal_tensor({2, h / 2, w / 2}), rng.normal_tensor({2, h / 2, w / 2})},
                    "[3,4,16]+[2,2,8]"};
  });
  r.emplace_back("disparity_loss", [](Rng& rng, int) {
    const int h = rng.uniform_int(2, 5), w = rng.uniform_int(3, 8);
    std::array<DisparityMap, 2> gt{random_disparity(rng, h, w, View::Left, 1, 5), random_disparity(rng, h, w, View::Right, 1, 5)};
    return Instance{[=](const std::vector<Tensor>& x) { return disparity_loss({x[0], x[1]}, gt); },
                    {rng.uniform_tensor({h, w}, 0, 7), rng.uniform_tensor({h, w}, 0, 7)}, shape_string({h, w})};
  });
  r.emplace_back("ssim", [](Rng& rng, int) {
    const Shape s = small_chw(rng);
    const auto ps = proj_seed(rng);
    return Instance{[ps](const std::vector<Tensor>& x) { return project(ssim(x[0], x[1]), ps); },
                    {rng.uniform_tensor(s, 0, 1), rng.uniform_tensor(s, 0, 1)}, shape_string(s)};
  });
  r.emplace_back("reprojection_loss", [](Rng& rng, int) {
    const int h = rng.uniform_int(3, 5), w = rng.uniform_int(6, 10);
    return Instance{[](const std::vector<Tensor>& x) { return reprojection_loss({x[0], x[1]}, {x[2], x[3]}, 0.85); },
                    {rng.uniform_tensor({3, h, w}, 0, 1), rng.uniform_tensor({3, h, w}, 0, 1),
                     rng.uniform_tensor({h, w}, 0.1, 2.9), rng.uniform_tensor({h, w}, 0.1, 2.9)},
                    shape_string({3, h, w})};
  });
  r.emplace_back("warp_ssim_mean", [](Rng& rng, int) {
    return Instance{[](const std::vector<Tensor>& x) { return mean(ssim(backward_warp(x[0], x[1]), x[2])); },
                    {rng.uniform_tensor({1, 6, 6}, 0, 1), rng.uniform_tensor({6, 6}, -2.9, 0.9),
                     rng.uniform_tensor({1, 6, 6}, 0, 1)},
                    "[1,6,6]"};
  });
  r.emplace_back("perceptual_loss", [](Rng& rng, int) {
    auto net = std::make_shared<PerceptualNet>();
    return Instance{[net](const std::vector<Tensor>& x) { return perceptual_loss(x[0], x[1], net->extractor()); },
                    {rng.uniform_tensor({3, 6, 8}, 0, 1), rng.uniform_tensor({3, 6, 8}, 0, 1)}, "[3,6,8]"};
  });
  r.emplace_back("feature_matching_loss", [](Rng& rng, int) {
    const Shape s = small_chw(rng);
    // real = fake + offset bounded away from zero keeps |fake - real| off its kink.
    const Tensor f1 = rng.normal_tensor(s), f2 = rng.normal_tensor({2, 3, 3});
    const Tensor r1 = add(f1, away_from_zero(rng, s)), r2 = add(f2, away_from_zero(rng, {2, 3, 3}));
    return Instance{[=](const std::vector<Tensor>& x) { return feature_matching_loss({x[0], x[1]}, {r1, r2}); },
                    {f1, f2}, shape_string(s)};
  });
  r.emplace_back("translator_generate", [](Rng& rng, int inst) {
    TranslatorConfig cfg;
    auto g = std::make_shared<Translator>(cfg, rng);
    const int h = 32, w = 64;
    TranslationInput in;
    for (int v = 0; v < 2; ++v) {
      in.source_images[v] = rng.uniform_tensor({3, h, w}, 0, 1);
      in.source_disparity[v] = random_disparity(rng, h, w, static_cast<View>(v), 2, 10);
      in.style_images[v] = rng.uniform_tensor({3, h, w}, 0, 1);
      in.latents[v] = g->sample_latent(rng);
    }
    const CameraRig rig = default_rig(h, w);
    const auto& block = g->sca_blocks()[static_cast<std::size_t>(inst % 3)];
    return Instance{[=](const std::vector<Tensor>&) {
                      const TranslationOutput out = g->translate(in, rig);
                      return add(mean(out.images[0]), mean(out.images[1]));
                    },
                    {block.attention.w_query}, "[3,32,64] sca" + std::to_string(inst % 3 + 1), 12};
  });
  r.emplace_back("matcher_predict", [](Rng& rng, int) {
    auto e = std::make_shared<Matcher>(MatcherConfig{}, rng);
    const Tensor l = rng.uniform_tensor({3, 8, 32}, 0, 1), rt = rng.uniform_tensor({3, 8, 32}, 0, 1);
    const ParamList p = e->parameters();
    return Instance{[=](const std::vector<Tensor>&) { return mean(e->predict(l, rt)); },
                    {p[0].tensor, p[2].tensor}, "[3,8,32]", 12};
  });
  return r;
}

}  // namespace

std::vector<std::string> gradcheck_ops() {
  std::vector<std::string> out;
  for (const auto& [name, b] : registry()) out.push_back(name);
  return out;
}

GradcheckReport run_gradcheck(std::uint64_t seed, double tolerance) {
  GradcheckReport report;
  report.tolerance = tolerance;
  const auto reg = registry();
  for (std::size_t k = 0; k < reg.size(); ++k) {
    for (int inst = 0; inst < 3; ++inst) {
      Rng rng(mix_seed(seed, k * 16 + static_cast<std::uint64_t>(inst)));
      const Instance in = reg[k].second(rng, inst);
      const GradcheckResult res = check_gradient(in.fn, in.inputs, 1e-5, in.max_entries, rng.engine()());
      report.cases.push_back({reg[k].first, inst, in.shape, res.relative_error,
                              std::isfinite(res.relative_error) && res.relative_error <= tolerance});
    }
  }
  return report;
}

}  // namespace sca
