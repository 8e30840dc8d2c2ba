#include <doctest.h>

#include <cmath>

#include "sca/attention.hpp"
#include "sca/errors.hpp"
#include "sca/matcher.hpp"
#include "sca/ops.hpp"
#include "sca/rng.hpp"
#include "sca/synth.hpp"
#include "sca/translator.hpp"

using namespace sca;

namespace {

SCAParams random_params(Rng& rng, int din, int dout, int dmax) {
  return SCAParams{rng.normal_tensor({dout, 2 * din}), rng.normal_tensor({dout, 2 * din}), dmax};
}

}  // namespace

TEST_CASE("attention weights sum to one over in-range candidates") {
  Rng rng(1);
  const SCAParams p = random_params(rng, 3, 4, 5);
  const Tensor xq = rng.normal_tensor({6, 2, 9}), xk = rng.normal_tensor({6, 2, 9});
  for (AttendDirection dir : {AttendDirection::LeftToRight, AttendDirection::RightToLeft}) {
    const Tensor a = sca_attention_weights(xq, xk, p, dir);
    for (int j = 0; j < 2; ++j)
      for (int i = 0; i < 9; ++i) {
        double s = 0;
        for (int d = 0; d <= 5; ++d) {
          const int col = i + candidate_step(dir) * d;
          if (col < 0 || col >= 9) CHECK(a.at(d, j, i) == 0.0);
          s += a.at(d, j, i);
        }
        CHECK(s == doctest::Approx(1.0));
      }
  }
}

TEST_CASE("attention with d_max 0 copies the aligned column") {
  Rng rng(2);
  const SCAParams p = random_params(rng, 2, 3, 0);
  const Tensor other = rng.normal_tensor({2, 3, 5});
  const Tensor out = sca_cross_attend(other, rng.normal_tensor({4, 3, 5}), rng.normal_tensor({4, 3, 5}), p,
                                      AttendDirection::LeftToRight);
  for (std::size_t k = 0; k < out.numel(); ++k) CHECK(out.at(k) == other.at(k));
}

TEST_CASE("sharp attention recovers a known shift") {
  // identity projections with large features: the logit peaks where the key
  // equals the query, i.e. at the true offset.
  const int c = 4, w = 20, shift = 3;
  Rng rng(3);
  Tensor right = rng.normal_tensor({c, 1, w}, 3.0);
  Tensor left(Shape{c, 1, w});
  for (int ch = 0; ch < c; ++ch)
    for (int i = 0; i < w; ++i) left.mutable_data()[ch * w + i] = right.at(ch, 0, std::max(0, i - shift));
  Tensor wq(Shape{c, 2 * c}), wk(Shape{c, 2 * c});
  for (int r = 0; r < c; ++r) wq.mutable_data()[r * 2 * c + r] = wk.mutable_data()[r * 2 * c + r] = 1.0;
  // values encode the column index so the output reads back the attended column
  Tensor cols(Shape{1, 1, w});
  for (int i = 0; i < w; ++i) cols.mutable_data()[i] = i;
  const Tensor xq = concat_channels({left, left}), xk = concat_channels({right, right});
  const Tensor weights = sca_attention_weights(xq, xk, SCAParams{wq, wk, 6}, AttendDirection::LeftToRight);
  int hits = 0;
  for (int i = 8; i < w; ++i) {
    int best = 0;
    for (int d = 1; d <= 6; ++d) best = weights.at(d, 0, i) > weights.at(best, 0, i) ? d : best;
    hits += best == shift;
  }
  CHECK(hits >= 10);
}

TEST_CASE("correlation examples") {
  Rng rng(4);
  SUBCASE("constant features peak at zero offset") {
    const Tensor f(Shape{3, 2, 10}, 0.7);
    const Tensor c = correlation_1d(f, f, 4);
    CHECK(c.shape() == Shape{5, 2, 10});
    for (int i = 0; i < 10; ++i)
      for (int d = 1; d <= 4; ++d) CHECK(c.at(0, 0, i) >= c.at(d, 0, i));
  }
  SUBCASE("shifted features peak at the shift") {
    const int k = 3, w = 24;
    const int ch = 64;
    const Tensor r = rng.normal_tensor({ch, 2, w});
    Tensor l(Shape{ch, 2, w});
    for (int c = 0; c < ch; ++c)
      for (int j = 0; j < 2; ++j)
        for (int i = k; i < w; ++i) l.mutable_data()[(c * 2 + j) * w + i] = r.at(c, j, i - k);
    const Tensor corr = correlation_1d(l, r, 6);
    for (int i = 6; i < w; ++i) {
      int best = 0;
      for (int d = 1; d <= 6; ++d) best = corr.at(d, 0, i) > corr.at(best, 0, i) ? d : best;
      CHECK(best == k);
    }
  }
  CHECK_THROWS_AS(correlation_1d(Tensor({1, 1, 4}), Tensor({1, 1, 4}), 4), InvalidArgument);
  CHECK_THROWS_AS(correlation_1d(Tensor({1, 1, 4}), Tensor({2, 1, 4}), 1), InvalidArgument);
}

TEST_CASE("matcher output contract") {
  Rng rng(5);
  const Matcher e(MatcherConfig{}, rng);
  const Tensor l = rng.uniform_tensor({3, 16, 32}, 0, 1), r = rng.uniform_tensor({3, 16, 32}, 0, 1);
  const Tensor d = e.predict(l, r);
  CHECK(d.shape() == Shape{16, 32});
  for (double v : d.data()) CHECK(v >= 0.0);
  CHECK(e.predict(l, r).values() == d.values());
  // right-view prediction is the flip trick
  const Tensor dr = e.predict_right(l, r);
  const Tensor manual = flip_horizontal(e.predict(flip_horizontal(r), flip_horizontal(l)));
  CHECK(dr.values() == manual.values());
  CHECK_THROWS_AS(e.predict(Tensor({3, 15, 32}), Tensor({3, 15, 32})), InvalidArgument);
}

TEST_CASE("scale_d_max rounds up") {
  CHECK(scale_d_max(16, 0) == 16);
  CHECK(scale_d_max(16, 1) == 8);
  CHECK(scale_d_max(16, 3) == 2);
  CHECK(scale_d_max(15, 2) == 4);
}

namespace {

TranslationInput toy_input(Rng& rng, const Translator& g, int h, int w) {
  SceneSpec s;
  s.height = h;
  s.width = w;
  s.seed = 9;
  const StereoSample src = generate_scene(s);
  s.domain = Domain::Target;
  const StereoSample tgt = generate_scene(s);
  return TranslationInput{src.images, src.disparity, tgt.images, {g.sample_latent(rng), g.sample_latent(rng)}};
}

}  // namespace

TEST_CASE("translator output contract") {
  Rng rng(6);
  const Translator g(TranslatorConfig{}, rng);
  const TranslationInput in = toy_input(rng, g, 32, 64);
  const TranslationOutput out = g.translate(in, default_rig(32, 64));
  for (int v = 0; v < 2; ++v) {
    CHECK(out.images[v].shape() == Shape{3, 32, 64});
    for (double x : out.images[v].data()) CHECK((x >= 0.0 && x <= 1.0));
  }
  REQUIRE(out.features.size() == 3);
  for (const ScaleFeatures& f : out.features) {
    const int n = f.scale;
    REQUIRE((n >= 1 && n <= 3));
    CHECK(f.views[0].shape() == Shape{16, 32 >> n, 64 >> n});
  }
  CHECK(g.translate(in, default_rig(32, 64)).images[0].values() == out.images[0].values());
  TranslationInput odd = in;
  odd.source_images[0] = Tensor({3, 30, 64});
  CHECK_THROWS_AS(g.translate(odd, default_rig(32, 64)), InvalidArgument);
}

TEST_CASE("the no-SCA ablation changes the output but not the parameters") {
  Rng rng(7);
  Translator g(TranslatorConfig{}, rng);
  const TranslationInput in = toy_input(rng, g, 32, 64);
  const auto with = g.translate(in, default_rig(32, 64)).images[0].values();
  const std::size_t n = g.parameters().size();
  g.mutable_config().use_sca = false;
  const auto without = g.translate(in, default_rig(32, 64)).images[0].values();
  CHECK(with != without);
  CHECK(g.parameters().size() == n);
}

TEST_CASE("SCA block parameters follow the configured key width") {
  Rng rng(8);
  const Translator g(TranslatorConfig{}, rng);
  Translator& gm = const_cast<Translator&>(g);
  REQUIRE(gm.sca_blocks().size() == 3);
  for (int n = 1; n <= 3; ++n) {
    const SCAParams& p = gm.sca_blocks()[n - 1].attention;
    CHECK(p.w_query.shape() == Shape{8, 32});
    CHECK(p.d_max == scale_d_max(16, n));
  }
}

TEST_CASE("discriminator produces per-scale logits with unit-norm kernels") {
  Rng rng(9);
  Discriminator d(DiscriminatorConfig{}, rng);
  d.prepare(false);
  const DiscriminatorOutput out = d(rng.uniform_tensor({3, 32, 64}, 0, 1));
  REQUIRE(out.logits.size() == 2);
  CHECK(out.logits[0].shape() == Shape{1, 8, 16});
  CHECK(out.logits[1].shape() == Shape{1, 4, 8});
  CHECK(out.hidden.size() == 4);
  for (const Tensor& k : d.effective_kernels()) {
    SpectralNormState st = make_spectral_norm_state(k.dim(0), rng);
    power_iterate(k, st, 300);
    CHECK(spectral_norm_estimate(k, st) == doctest::Approx(1.0).epsilon(1e-3));
  }
}
