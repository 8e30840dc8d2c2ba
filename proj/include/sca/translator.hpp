#pragma once

#include <array>
#include <vector>

#include "sca/attention.hpp"
#include "sca/geometry.hpp"
#include "sca/layers.hpp"
#include "sca/spectral_norm.hpp"

namespace sca {

struct TranslatorConfig {
  int num_scales = 3;       // feature scales n = 1..N at H/2^n
  int base_channels = 16;   // channels at every feature scale
  int head_channels = 8;    // full-resolution content stem / output head
  int key_channels = 8;     // d_out of W_Q, W_K
  int latent_channels = 8;
  int d_max_full = 16;
  bool use_sca = true;
};

// d_max at feature scale n: ceil(d_max_full / 2^n).
int scale_d_max(int d_max_full, int scale);

// Features of both views at one scale (scale 0 = full resolution).
struct ScaleFeatures {
  int scale = 0;
  std::array<Tensor, 2> views;  // [left, right]
};

struct TranslationInput {
  std::array<Tensor, 2> source_images;        // [3,H,W] in [0,1]
  std::array<DisparityMap, 2> source_disparity;
  std::array<Tensor, 2> style_images;         // target-domain [3,H,W]
  std::array<Tensor, 2> latents;              // [latent_channels] each
};

struct TranslationOutput {
  std::array<Tensor, 2> images;          // [3,H,W] in [0,1]
  std::vector<ScaleFeatures> features;   // generator features, coarsest scale first
};

class Translator {
 public:
  Translator(const TranslatorConfig& config, Rng& rng);

  const TranslatorConfig& config() const { return config_; }
  TranslatorConfig& mutable_config() { return config_; }

  // Divisor applied to world points before they enter the content stream.
  double cloud_scale() const { return cloud_scale_.at(0); }
  void set_cloud_scale(double s);

  // levels[n] for n = 0..N; input is concat(image, cloud / cloud_scale).
  std::vector<Tensor> content_stream(const Tensor& image, const PointCloudImage& cloud) const;
  // levels[n] for n = 1..N; levels[0] is left undefined.
  std::vector<Tensor> style_stream(const Tensor& image) const;

  TranslationOutput generate(const std::array<Tensor, 2>& latents,
                             const std::array<std::vector<Tensor>, 2>& content,
                             const std::array<std::vector<Tensor>, 2>& style) const;

  // Full pipeline: point clouds from the source disparities, both streams,
  // generator.
  TranslationOutput translate(const TranslationInput& in, const CameraRig& rig) const;

  Tensor sample_latent(Rng& rng) const;

  ParamList parameters() const;  // trainable tensors
  ParamList state() const;       // parameters + non-trainable state (cloud scale)

  // Exposed for tests and ablation.
  std::vector<SCABlock>& sca_blocks() { return sca_; }
  std::vector<FadeResBlock>& fade_blocks() { return fade_; }

 private:
  void check_image(const Tensor& image, int channels, const char* what) const;

  TranslatorConfig config_;
  Tensor cloud_scale_;
  std::vector<Conv2d> content_;  // [0] stem at full res, [n] stride-2 to scale n
  std::vector<Conv2d> style_;    // [n-1] stride-2 to scale n
  Conv2d latent_in_;
  std::vector<FadeResBlock> fade_;  // index n-1
  std::vector<SCABlock> sca_;       // index n-1
  Conv2d head_;
  Fade head_fade_;
  Conv2d out_;
};

struct DiscriminatorConfig {
  int num_scales = 2;     // image pyramid levels (avg-pooled by 2 per level)
  int base_channels = 16;
  int warmup_power_iterations = 200;
};

struct DiscriminatorOutput {
  std::vector<Tensor> logits;  // one raw logit map per scale
  std::vector<Tensor> hidden;  // hidden activations, scale-major
};

// Multi-scale patch discriminator with spectrally normalised kernels.
class Discriminator {
 public:
  Discriminator(const DiscriminatorConfig& config, Rng& rng);

  // Recomputes the effective (normalised) kernels; with advance=true the
  // power iteration takes one step first. Call once per forward pass batch
  // element; the kernels participate in the autodiff graph.
  void prepare(bool advance);
  DiscriminatorOutput operator()(const Tensor& image) const;

  const std::vector<Tensor>& effective_kernels() const { return effective_; }
  ParamList parameters() const;
  ParamList state() const;  // parameters + power-iteration vectors
  // Restores u vectors from tensors previously returned by state().
  void load_power_state();

 private:
  struct Layer {
    Conv2d conv;
    SpectralNormState sn;
    Tensor u_tensor;  // mirrors sn.u_vector for checkpointing
  };

  DiscriminatorConfig config_;
  std::vector<std::vector<Layer>> scales_;
  std::vector<Tensor> effective_;
};

}  // namespace sca
