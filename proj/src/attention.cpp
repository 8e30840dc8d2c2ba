#include "sca/attention.hpp"

#include <cmath>
#include <limits>

#include "sca/errors.hpp"
#include "sca/ops.hpp"

namespace sca {

namespace {

// W [d_out, 2 d_in] applied pointwise to X [2 d_in, H, W].
Tensor project(const Tensor& w, const Tensor& x) {
  return conv2d(x, reshape(w, Shape{w.dim(0), w.dim(1), 1, 1}), 1, 0);
}

}  // namespace

void SCAParams::validate() const {
  if (w_query.rank() != 2 || w_key.rank() != 2 || w_query.shape() != w_key.shape()) {
    throw InvalidArgument("SCAParams: W_Q and W_K must share shape [d_out, 2 d_in]");
  }
  if (w_query.dim(1) % 2 != 0) throw InvalidArgument("SCAParams: projection input width must be 2 d_in");
  if (d_max < 0) throw InvalidArgument("SCAParams: d_max must be >= 0");
}

Tensor sca_logits(const Tensor& query_source, const Tensor& key_source, const SCAParams& params,
                  AttendDirection dir) {
  params.validate();
  if (query_source.shape() != key_source.shape()) {
    throw InvalidArgument("sca: query/key sources differ " + shape_string(query_source.shape()) +
                          " vs " + shape_string(key_source.shape()));
  }
  if (query_source.dim(0) != params.w_query.dim(1)) {
    throw InvalidArgument("sca: source has " + std::to_string(query_source.dim(0)) +
                          " channels, projections expect " + std::to_string(params.w_query.dim(1)));
  }
  if (params.d_max >= query_source.dim(2)) {
    throw InvalidArgument("sca: d_max " + std::to_string(params.d_max) + " >= feature width " +
                          std::to_string(query_source.dim(2)));
  }
  const Tensor q = project(params.w_query, query_source);
  const Tensor k = project(params.w_key, key_source);
  return epipolar_dot(q, k, params.d_max, candidate_step(dir), 1.0,
                      -std::numeric_limits<double>::infinity());
}

Tensor sca_attention_weights(const Tensor& query_source, const Tensor& key_source,
                             const SCAParams& params, AttendDirection dir) {
  return softmax(sca_logits(query_source, key_source, params, dir), 0);
}

Tensor sca_cross_attend(const Tensor& other_values, const Tensor& query_source,
                        const Tensor& key_source, const SCAParams& params, AttendDirection dir) {
  if (other_values.rank() != 3 || other_values.dim(1) != query_source.dim(1) ||
      other_values.dim(2) != query_source.dim(2)) {
    throw InvalidArgument("sca: value features " + shape_string(other_values.shape()) +
                          " do not match sources " + shape_string(query_source.shape()));
  }
  const Tensor weights = sca_attention_weights(query_source, key_source, params, dir);
  return epipolar_gather(weights, other_values, params.d_max, candidate_step(dir));
}

SCABlock::SCABlock(int channels, int key_channels, int d_max, Rng& rng)
    : residual(channels, channels, 3, 1, rng, 0.5), fade(channels, channels, rng) {
  const double s = 1.0 / std::sqrt(2.0 * channels);
  attention.w_query = rng.normal_tensor(Shape{key_channels, 2 * channels}, s);
  attention.w_key = rng.normal_tensor(Shape{key_channels, 2 * channels}, s);
  attention.w_query.set_requires_grad(true);
  attention.w_key.set_requires_grad(true);
  attention.d_max = d_max;
}

std::array<Tensor, 2> SCABlock::operator()(const std::array<Tensor, 2>& gen,
                                           const std::array<Tensor, 2>& content) const {
  for (int v = 0; v < 2; ++v) {
    if (gen[v].shape() != content[v].shape()) {
      throw InvalidArgument("SCABlock: generator " + shape_string(gen[v].shape()) +
                            " vs content " + shape_string(content[v].shape()));
    }
  }
  const std::array<Tensor, 2> sources{concat_channels({gen[0], content[0]}),
                                      concat_channels({gen[1], content[1]})};
  std::array<Tensor, 2> out;
  for (int v = 0; v < 2; ++v) {
    const int o = 1 - v;
    const auto dir = v == 0 ? AttendDirection::LeftToRight : AttendDirection::RightToLeft;
    const Tensor attended = sca_cross_attend(gen[o], sources[v], sources[o], attention, dir);
    out[v] = fade(add(gen[v], residual(attended)), content[v]);
  }
  return out;
}

void SCABlock::collect(ParamList& out, const std::string& prefix) const {
  out.push_back({prefix + ".w_query", attention.w_query});
  out.push_back({prefix + ".w_key", attention.w_key});
  residual.collect(out, prefix + ".residual");
  fade.collect(out, prefix + ".fade");
}

}  // namespace sca
