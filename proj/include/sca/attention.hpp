#pragma once

// Stereoscopic cross attention: a query pixel in one view attends to the
// candidates on the same row of the other view at disparity offsets
// d = 0..d_max (column i - d when querying from the left view, i + d when
// querying from the right view).

#include <array>
#include <string>

#include "sca/layers.hpp"

namespace sca {

enum class AttendDirection { LeftToRight, RightToLeft };

// Column step of the candidate offsets: -1 for LeftToRight, +1 otherwise.
constexpr int candidate_step(AttendDirection dir) { return dir == AttendDirection::LeftToRight ? -1 : 1; }

struct SCAParams {
  Tensor w_query;  // [d_out, 2 d_in]
  Tensor w_key;    // [d_out, 2 d_in]
  int d_max = 0;

  void validate() const;
};

// logits[d,j,i] = Q(i,j)^T K(candidate); -inf for out-of-image candidates.
Tensor sca_logits(const Tensor& query_source, const Tensor& key_source, const SCAParams& params,
                  AttendDirection dir);

// softmax over d of the logits; [d_max+1, H, W].
Tensor sca_attention_weights(const Tensor& query_source, const Tensor& key_source,
                             const SCAParams& params, AttendDirection dir);

// sum_d softmax_d(Q(i,j)^T K(candidate_d)) * other_values(candidate_d), where
// Q = W_Q query_source and K = W_K key_source (both [2 d_in, H, W]) and
// other_values is [d_in, H, W].
Tensor sca_cross_attend(const Tensor& other_values, const Tensor& query_source,
                        const Tensor& key_source, const SCAParams& params, AttendDirection dir);

// Per-scale SCA block shared by both views. For view v with partner o:
//   X_v = concat(F_g^v, F_content^v)
//   out_v = fade(F_g^v + residual(sca_cross_attend(F_g^o, X_v, X_o)), F_content^v)
struct SCABlock {
  SCAParams attention;
  Conv2d residual;
  Fade fade;

  SCABlock() = default;
  SCABlock(int channels, int key_channels, int d_max, Rng& rng);

  std::array<Tensor, 2> operator()(const std::array<Tensor, 2>& gen,
                                   const std::array<Tensor, 2>& content) const;
  void collect(ParamList& out, const std::string& prefix) const;
};

}  // namespace sca
