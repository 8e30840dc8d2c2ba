#pragma once

// Raw numeric kernels behind the differentiable ops. Loops over independent
// output planes/rows are OpenMP-parallel; every output element is produced by
// exactly one thread in a fixed order, so results are bit-identical for any
// thread count.

#include <span>

namespace sca::kernels {

struct ConvGeometry {
  int in_channels, height, width;
  int out_channels, kernel_h, kernel_w;
  int stride, padding;
  int out_height() const { return (height + 2 * padding - kernel_h) / stride + 1; }
  int out_width() const { return (width + 2 * padding - kernel_w) / stride + 1; }
};

// out must be pre-sized to [Co,Ho,Wo]; bias may be empty.
void conv2d_forward(const ConvGeometry& g, std::span<const double> input,
                    std::span<const double> weight, std::span<const double> bias,
                    std::span<double> out);
// Accumulates (+=) into grad_input.
void conv2d_backward_input(const ConvGeometry& g, std::span<const double> grad_out,
                           std::span<const double> weight, std::span<double> grad_input);
// Accumulates (+=) into grad_weight / grad_bias (grad_bias may be empty).
void conv2d_backward_weight(const ConvGeometry& g, std::span<const double> grad_out,
                            std::span<const double> input, std::span<double> grad_weight,
                            std::span<double> grad_bias);

// Epipolar candidate offset: -1 samples column i - d, +1 samples i + d.
// out[d,j,i] = scale * sum_c a[c,j,i] * b[c,j,i + step*d]; `fill` where the
// candidate column is outside [0, W).
void epipolar_dot_forward(int channels, int height, int width, int max_offset, int step,
                          double scale, double fill, std::span<const double> a,
                          std::span<const double> b, std::span<double> out);
void epipolar_dot_backward(int channels, int height, int width, int max_offset, int step,
                           double scale, std::span<const double> grad_out,
                           std::span<const double> a, std::span<const double> b,
                           std::span<double> grad_a, std::span<double> grad_b);

// out[c,j,i] = sum_d w[d,j,i] * v[c,j,i + step*d] over in-range candidates.
void epipolar_gather_forward(int channels, int height, int width, int max_offset, int step,
                             std::span<const double> weights, std::span<const double> values,
                             std::span<double> out);
void epipolar_gather_backward(int channels, int height, int width, int max_offset, int step,
                              std::span<const double> grad_out, std::span<const double> weights,
                              std::span<const double> values, std::span<double> grad_weights,
                              std::span<double> grad_values);

// Horizontal linear-interpolation warp:
// out[c,j,i] = sum_k max(0, 1 - |i + offset[j,i] - k|) * src[c,j,k].
void warp_forward(int channels, int height, int width, std::span<const double> src,
                  std::span<const double> offset, std::span<double> out);
void warp_backward(int channels, int height, int width, std::span<const double> grad_out,
                   std::span<const double> src, std::span<const double> offset,
                   std::span<double> grad_src, std::span<double> grad_offset);

// 3x3 mean filter, stride 1, reflect padding (requires H, W >= 2).
void box3_forward(int channels, int height, int width, std::span<const double> in,
                  std::span<double> out);
void box3_backward(int channels, int height, int width, std::span<const double> grad_out,
                   std::span<double> grad_in);

// Bilinear upsampling by an integer factor (half-pixel centres, edge clamp).
void upsample_bilinear_forward(int channels, int height, int width, int factor,
                               std::span<const double> in, std::span<double> out);
void upsample_bilinear_backward(int channels, int height, int width, int factor,
                                std::span<const double> grad_out, std::span<double> grad_in);

}  // namespace sca::kernels
