#pragma once

#include <span>
#include <vector>

#include "lsc/refnet/tensor.hpp"

namespace lsc::nn {

/// Geometry of a square-kernel convolution.
struct ConvGeometry {
  int kernel = 3;
  int stride = 1;
  int pad = 1;

  int output_size(int input) const { return (input + 2 * pad - kernel) / stride + 1; }
  /// Output size of the transposed convolution with the same geometry.
  int transposed_size(int input) const { return (input - 1) * stride - 2 * pad + kernel; }
};

/// Unfolds (C, H, W) into a (C*k*k, OH*OW) row-major patch matrix.
void im2col(const double* image, Shape shape, ConvGeometry g, std::vector<double>& cols);
/// Adjoint of im2col: scatters the patch matrix back, accumulating into `image`.
void col2im(const double* cols, Shape shape, ConvGeometry g, double* image);

// Convolution, weight (cout, cin, k, k).
Tensor conv2d_forward(const Tensor& input, std::span<const double> weight, std::span<const double> bias,
                      int out_channels, ConvGeometry g, std::vector<double>& cols);
/// Accumulates into grad_weight / grad_bias; grad_input is overwritten (may be null).
void conv2d_backward(const Tensor& input, std::span<const double> weight, const Tensor& grad_output,
                     ConvGeometry g, const std::vector<double>& cols, Tensor* grad_input,
                     std::span<double> grad_weight, std::span<double> grad_bias);

// Transposed convolution, weight (cin, cout, k, k).
Tensor conv_transpose2d_forward(const Tensor& input, std::span<const double> weight,
                                std::span<const double> bias, int out_channels, ConvGeometry g);
void conv_transpose2d_backward(const Tensor& input, std::span<const double> weight,
                               const Tensor& grad_output, ConvGeometry g, Tensor* grad_input,
                               std::span<double> grad_weight, std::span<double> grad_bias);

/// 2x2 max pool, stride 2; `argmax` receives the flat input index of each output.
Tensor max_pool2x2_forward(const Tensor& input, std::vector<std::size_t>& argmax);
void max_pool2x2_backward(const Tensor& grad_output, const std::vector<std::size_t>& argmax,
                          Tensor& grad_input);

Tensor relu_forward(const Tensor& input);
/// Gradient passes where the forward output was positive.
void relu_backward(const Tensor& output, const Tensor& grad_output, Tensor& grad_input);

Tensor concat_channels(std::span<const Tensor* const> inputs);

}  // namespace lsc::nn
