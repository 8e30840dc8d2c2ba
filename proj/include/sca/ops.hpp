#pragma once

// Differentiable tensor operations. All ops are pure: they return new tensors
// and record a backward closure when any input requires a gradient.

#include <vector>

#include "sca/tensor.hpp"

namespace sca {

// Elementwise (shapes must match exactly).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);  // b must be nonzero
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor neg(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope = 0.2);
Tensor tanh(const Tensor& a);
Tensor softplus(const Tensor& a);
// 0.5 x^2 for |x| < 1, |x| - 0.5 otherwise.
Tensor smooth_l1(const Tensor& a);

// Reductions to a scalar.
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

Tensor reshape(const Tensor& a, Shape shape);
Tensor matmul(const Tensor& a, const Tensor& b);  // [M,K] x [K,N]

// [C,H,W] * [H,W] -> [C,H,W] (the map is broadcast over channels).
Tensor mul_spatial(const Tensor& x, const Tensor& map);
// [C,H,W] -> [H,W]
Tensor sum_channels(const Tensor& x);

Tensor concat_channels(const std::vector<Tensor>& parts);
Tensor slice_channels(const Tensor& x, int begin, int end);
// Reverses the last axis.
Tensor flip_horizontal(const Tensor& x);

// input [Ci,H,W], weight [Co,Ci,kh,kw], bias [Co] or undefined.
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride,
              int padding);
inline Tensor conv2d(const Tensor& input, const Tensor& weight, int stride, int padding) {
  return conv2d(input, weight, Tensor(), stride, padding);
}

// Softmax along `axis`. -infinity entries get weight 0; a slice whose entries
// are all -infinity yields all zeros.
Tensor softmax(const Tensor& logits, int axis);

// Per-channel statistics of [C,H,W] tensors.
Tensor channel_mean(const Tensor& x);               // [C]
Tensor channel_std(const Tensor& x, double eps);    // [C], sqrt(var + eps), biased var
Tensor instance_norm(const Tensor& x, double eps);  // (x - mean) / sqrt(var + eps)
// x * scale[c] + shift[c]
Tensor modulate_channels(const Tensor& x, const Tensor& scale, const Tensor& shift);

Tensor box_filter3(const Tensor& x);               // 3x3 mean, stride 1, reflect pad
Tensor avg_pool2(const Tensor& x);                 // 2x2 mean, stride 2
Tensor upsample_nearest2(const Tensor& x);
Tensor upsample_bilinear(const Tensor& x, int factor);

// Horizontal linear-interpolation warp, src [C,H,W] or [H,W], offset [H,W]:
// out(i,j) = sum_k max(0, 1 - |i + offset(i,j) - k|) src(k,j).
// Columns outside the image contribute zero.
Tensor warp_horizontal(const Tensor& src, const Tensor& offset);

// Epipolar candidate scores over offsets d = 0..max_offset, step -1 (column
// i - d) or +1 (column i + d):
// out[d,j,i] = scale * sum_c a[c,j,i] b[c,j,i + step d], `fill` out of range.
Tensor epipolar_dot(const Tensor& a, const Tensor& b, int max_offset, int step, double scale,
                    double fill);
// out[c,j,i] = sum_d weights[d,j,i] values[c,j,i + step d], in-range only.
Tensor epipolar_gather(const Tensor& weights, const Tensor& values, int max_offset, int step);

}  // namespace sca
