#include "sca/translator.hpp"

#include <cmath>

#include "sca/errors.hpp"
#include "sca/ops.hpp"

namespace sca {

int scale_d_max(int d_max_full, int scale) {
  const int denom = 1 << scale;
  return (d_max_full + denom - 1) / denom;
}

Translator::Translator(const TranslatorConfig& config, Rng& rng)
    : config_(config), cloud_scale_(Shape{1}, 1.0) {
  if (config_.num_scales < 2) throw InvalidArgument("Translator: num_scales must be >= 2");
  const int n = config_.num_scales;
  const int c = config_.base_channels;
  const int h = config_.head_channels;

  content_.emplace_back(6, h, 3, 1, rng);
  content_.emplace_back(h, c, 3, 2, rng);
  for (int s = 2; s <= n; ++s) content_.emplace_back(c, c, 3, 2, rng);

  style_.emplace_back(3, c, 3, 2, rng);
  for (int s = 2; s <= n; ++s) style_.emplace_back(c, c, 3, 2, rng);

  latent_in_ = Conv2d(config_.latent_channels, c, 3, 1, rng);
  for (int s = 1; s <= n; ++s) {
    fade_.emplace_back(c, c, rng);
    sca_.emplace_back(c, config_.key_channels, scale_d_max(config_.d_max_full, s), rng);
  }
  head_ = Conv2d(c, h, 3, 1, rng);
  head_fade_ = Fade(h, h, rng);
  out_ = Conv2d(h, 3, 3, 1, rng, 0.5);
}

void Translator::set_cloud_scale(double s) {
  if (!(s > 0.0) || !std::isfinite(s)) throw InvalidArgument("Translator: cloud scale must be > 0");
  cloud_scale_.mutable_data()[0] = s;
}

void Translator::check_image(const Tensor& image, int channels, const char* what) const {
  if (image.rank() != 3 || image.dim(0) != channels) {
    throw InvalidArgument(std::string(what) + ": expected [" + std::to_string(channels) +
                          ",H,W], got " + shape_string(image.shape()));
  }
  const int f = 1 << config_.num_scales;
  if (image.dim(1) % f != 0 || image.dim(2) % f != 0) {
    throw InvalidArgument(std::string(what) + ": H and W must be divisible by " + std::to_string(f));
  }
}

std::vector<Tensor> Translator::content_stream(const Tensor& image, const PointCloudImage& cloud) const {
  check_image(image, 3, "content_stream");
  if (cloud.points.rank() != 3 || cloud.points.dim(1) != image.dim(1) ||
      cloud.points.dim(2) != image.dim(2)) {
    throw InvalidArgument("content_stream: cloud " + shape_string(cloud.points.shape()) +
                          " does not match image " + shape_string(image.shape()));
  }
  const Tensor x = concat_channels({image, scale(cloud.points, 1.0 / cloud_scale())});
  std::vector<Tensor> levels;
  levels.push_back(leaky_relu(content_[0](x), kLeakySlope));
  for (int s = 1; s <= config_.num_scales; ++s) {
    levels.push_back(leaky_relu(content_[s](levels.back()), kLeakySlope));
  }
  return levels;
}

std::vector<Tensor> Translator::style_stream(const Tensor& image) const {
  check_image(image, 3, "style_stream");
  std::vector<Tensor> levels(1);
  Tensor x = image;
  for (int s = 1; s <= config_.num_scales; ++s) {
    x = leaky_relu(style_[s - 1](x), kLeakySlope);
    levels.push_back(x);
  }
  return levels;
}

Tensor Translator::sample_latent(Rng& rng) const {
  return rng.normal_tensor(Shape{config_.latent_channels});
}

TranslationOutput Translator::generate(const std::array<Tensor, 2>& latents,
                                       const std::array<std::vector<Tensor>, 2>& content,
                                       const std::array<std::vector<Tensor>, 2>& style) const {
  const int n = config_.num_scales;
  for (int v = 0; v < 2; ++v) {
    if (static_cast<int>(content[v].size()) != n + 1 || static_cast<int>(style[v].size()) != n + 1) {
      throw InvalidArgument("generate: expected " + std::to_string(n + 1) + " feature levels per view");
    }
    if (latents[v].numel() != static_cast<std::size_t>(config_.latent_channels)) {
      throw InvalidArgument("generate: latent code must have " +
                            std::to_string(config_.latent_channels) + " entries");
    }
  }
  if (content[0][n].shape() != content[1][n].shape()) {
    throw InvalidArgument("generate: left/right content shapes differ");
  }

  const int hc = content[0][n].dim(1), wc = content[0][n].dim(2);
  TranslationOutput out;
  std::array<Tensor, 2> x;
  for (int v = 0; v < 2; ++v) {
    // Broadcast z over the coarsest grid.
    std::vector<double> plane(static_cast<std::size_t>(config_.latent_channels) * hc * wc);
    const auto z = latents[v].data();
    for (int c = 0; c < config_.latent_channels; ++c)
      for (int p = 0; p < hc * wc; ++p) plane[static_cast<std::size_t>(c) * hc * wc + p] = z[c];
    x[v] = latent_in_(Tensor(Shape{config_.latent_channels, hc, wc}, std::move(plane)));
  }

  for (int s = n; s >= 1; --s) {
    for (int v = 0; v < 2; ++v) {
      if (s < n) x[v] = upsample_bilinear(x[v], 2);
      x[v] = fadain(x[v], style[v][s]);
    }
    if (config_.use_sca) x = sca_[s - 1](x, {content[0][s], content[1][s]});
    for (int v = 0; v < 2; ++v) x[v] = fade_[s - 1](x[v], content[v][s]);
    out.features.push_back({s, x});
  }

  for (int v = 0; v < 2; ++v) {
    Tensor h = head_(upsample_bilinear(x[v], 2));
    h = leaky_relu(head_fade_(h, content[v][0]), kLeakySlope);
    out.images[v] = scale(add_scalar(tanh(out_(h)), 1.0), 0.5);
  }
  return out;
}

TranslationOutput Translator::translate(const TranslationInput& in, const CameraRig& rig) const {
  std::array<std::vector<Tensor>, 2> content, style;
  for (int v = 0; v < 2; ++v) {
    const PointCloudImage cloud = disparity_to_world_points(in.source_disparity[v], rig);
    content[v] = content_stream(in.source_images[v], cloud);
    style[v] = style_stream(in.style_images[v]);
  }
  return generate(in.latents, content, style);
}

ParamList Translator::parameters() const {
  ParamList out;
  for (std::size_t k = 0; k < content_.size(); ++k) content_[k].collect(out, "G.content" + std::to_string(k));
  for (std::size_t k = 0; k < style_.size(); ++k) style_[k].collect(out, "G.style" + std::to_string(k + 1));
  latent_in_.collect(out, "G.latent");
  for (std::size_t k = 0; k < fade_.size(); ++k) fade_[k].collect(out, "G.fade_res" + std::to_string(k + 1));
  for (std::size_t k = 0; k < sca_.size(); ++k) sca_[k].collect(out, "G.sca" + std::to_string(k + 1));
  head_.collect(out, "G.head");
  head_fade_.collect(out, "G.head_fade");
  out_.collect(out, "G.out");
  return out;
}

ParamList Translator::state() const {
  ParamList out = parameters();
  out.push_back({"G.meta.cloud_scale", cloud_scale_});
  return out;
}

Discriminator::Discriminator(const DiscriminatorConfig& config, Rng& rng) : config_(config) {
  if (config_.num_scales < 1) throw InvalidArgument("Discriminator: num_scales must be >= 1");
  const int c = config_.base_channels;
  for (int k = 0; k < config_.num_scales; ++k) {
    std::vector<Layer> layers;
    layers.push_back({Conv2d(3, c, 3, 2, rng), {}, {}});
    layers.push_back({Conv2d(c, 2 * c, 3, 2, rng), {}, {}});
    layers.push_back({Conv2d(2 * c, 1, 3, 1, rng), {}, {}});
    for (auto& l : layers) {
      l.sn = make_spectral_norm_state(l.conv.out_channels(), rng);
      power_iterate(l.conv.weight, l.sn, config_.warmup_power_iterations);
      l.u_tensor = Tensor(Shape{l.conv.out_channels()}, l.sn.u_vector);
    }
    scales_.push_back(std::move(layers));
  }
  prepare(false);
}

void Discriminator::prepare(bool advance) {
  effective_.clear();
  for (auto& layers : scales_) {
    for (auto& l : layers) {
      effective_.push_back(spectral_normalize(l.conv.weight, l.sn, advance));
      std::copy(l.sn.u_vector.begin(), l.sn.u_vector.end(), l.u_tensor.mutable_data().begin());
    }
  }
}

DiscriminatorOutput Discriminator::operator()(const Tensor& image) const {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw InvalidArgument("discriminate: expected [3,H,W], got " + shape_string(image.shape()));
  }
  DiscriminatorOutput out;
  Tensor pyramid = image;
  std::size_t e = 0;
  for (std::size_t k = 0; k < scales_.size(); ++k) {
    if (k > 0) pyramid = avg_pool2(pyramid);
    Tensor x = pyramid;
    const auto& layers = scales_[k];
    for (std::size_t l = 0; l < layers.size(); ++l) {
      x = layers[l].conv.apply_with(x, effective_[e++]);
      if (l + 1 < layers.size()) {
        x = leaky_relu(x, kLeakySlope);
        out.hidden.push_back(x);
      }
    }
    out.logits.push_back(x);
  }
  return out;
}

ParamList Discriminator::parameters() const {
  ParamList out;
  for (std::size_t k = 0; k < scales_.size(); ++k)
    for (std::size_t l = 0; l < scales_[k].size(); ++l)
      scales_[k][l].conv.collect(out, "C.s" + std::to_string(k) + ".conv" + std::to_string(l));
  return out;
}

ParamList Discriminator::state() const {
  ParamList out = parameters();
  for (std::size_t k = 0; k < scales_.size(); ++k)
    for (std::size_t l = 0; l < scales_[k].size(); ++l)
      out.push_back({"C.s" + std::to_string(k) + ".conv" + std::to_string(l) + ".u", scales_[k][l].u_tensor});
  return out;
}

void Discriminator::load_power_state() {
  for (auto& layers : scales_)
    for (auto& l : layers) {
      const auto u = l.u_tensor.data();
      l.sn.u_vector.assign(u.begin(), u.end());
    }
  prepare(false);
}

}  // namespace sca
