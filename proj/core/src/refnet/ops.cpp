#include "lsc/refnet/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <limits>

namespace lsc::nn {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;

void check_weight(std::span<const double> weight, std::size_t expected) {
  if (weight.size() != expected) throw Error("weight buffer has the wrong size");
}


// Output columns [lo, hi) whose input column ox*stride - pad + k lies inside [0, width).
void valid_range(int width, int out, ConvGeometry g, int k, int& lo, int& hi) {
  lo = 0;
  while (lo < out && lo * g.stride - g.pad + k < 0) ++lo;
  hi = out;
  while (hi > lo && (hi - 1) * g.stride - g.pad + k >= width) --hi;
}

// Plain sequential row sums. Vectorised reductions split the sum at the first
// aligned address, which makes the last bit depend on where the buffer landed.
void add_row_sums(const double* m, int rows, std::size_t cols, double* out) {
  for (int r = 0; r < rows; ++r) {
    const double* row = m + static_cast<std::size_t>(r) * cols;
    double acc = 0.0;
    for (std::size_t i = 0; i < cols; ++i) acc += row[i];
    out[r] += acc;
  }
}

}  // namespace

void im2col(const double* image, Shape shape, ConvGeometry g, std::vector<double>& cols) {
  const int oh = g.output_size(shape.height);
  const int ow = g.output_size(shape.width);
  const std::size_t out_plane = static_cast<std::size_t>(oh) * ow;
  cols.resize(static_cast<std::size_t>(shape.channels) * g.kernel * g.kernel * out_plane);
  double* dst = cols.data();
  for (int c = 0; c < shape.channels; ++c) {
    const double* src = image + c * shape.plane();
    for (int ky = 0; ky < g.kernel; ++ky) {
      for (int kx = 0; kx < g.kernel; ++kx, dst += out_plane) {
        int lo = 0;
        int hi = 0;
        valid_range(shape.width, ow, g, kx, lo, hi);
        for (int oy = 0; oy < oh; ++oy) {
          double* row = dst + static_cast<std::size_t>(oy) * ow;
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= shape.height) {
            std::fill(row, row + ow, 0.0);
            continue;
          }
          std::fill(row, row + lo, 0.0);
          std::fill(row + hi, row + ow, 0.0);
          const double* in_row = src + static_cast<std::size_t>(iy) * shape.width;
          const int shift = kx - g.pad;
          if (g.stride == 1) {
            std::copy(in_row + lo + shift, in_row + hi + shift, row + lo);
          } else {
            for (int ox = lo; ox < hi; ++ox) row[ox] = in_row[ox * g.stride + shift];
          }
        }
      }
    }
  }
}

void col2im(const double* cols, Shape shape, ConvGeometry g, double* image) {
  const int oh = g.output_size(shape.height);
  const int ow = g.output_size(shape.width);
  const std::size_t out_plane = static_cast<std::size_t>(oh) * ow;
  const double* src = cols;
  for (int c = 0; c < shape.channels; ++c) {
    double* dst = image + c * shape.plane();
    for (int ky = 0; ky < g.kernel; ++ky) {
      for (int kx = 0; kx < g.kernel; ++kx, src += out_plane) {
        int lo = 0;
        int hi = 0;
        valid_range(shape.width, ow, g, kx, lo, hi);
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= shape.height) continue;
          const double* row = src + static_cast<std::size_t>(oy) * ow;
          double* out_row = dst + static_cast<std::size_t>(iy) * shape.width;
          const int shift = kx - g.pad;
          if (g.stride == 1) {
            for (int ox = lo; ox < hi; ++ox) out_row[ox + shift] += row[ox];
          } else {
            for (int ox = lo; ox < hi; ++ox) out_row[ox * g.stride + shift] += row[ox];
          }
        }
      }
    }
  }
}

Tensor conv2d_forward(const Tensor& input, std::span<const double> weight, std::span<const double> bias,
                      int out_channels, ConvGeometry g, std::vector<double>& cols) {
  const int k2c = input.channels() * g.kernel * g.kernel;
  check_weight(weight, static_cast<std::size_t>(out_channels) * k2c);
  check_weight(bias, static_cast<std::size_t>(out_channels));
  const Shape out_shape{out_channels, g.output_size(input.height()), g.output_size(input.width())};
  if (out_shape.height <= 0 || out_shape.width <= 0) throw Error("convolution input too small");
  im2col(input.data(), input.shape(), g, cols);
  Tensor out(out_shape);
  const auto plane = static_cast<Eigen::Index>(out_shape.plane());
  MatrixMap o(out.data(), out_channels, plane);
  o.noalias() = ConstMatrixMap(weight.data(), out_channels, k2c) * ConstMatrixMap(cols.data(), k2c, plane);
  o.colwise() += ConstVectorMap(bias.data(), out_channels);
  return out;
}

void conv2d_backward(const Tensor& input, std::span<const double> weight, const Tensor& grad_output,
                     ConvGeometry g, const std::vector<double>& cols, Tensor* grad_input,
                     std::span<double> grad_weight, std::span<double> grad_bias) {
  const int cout = grad_output.channels();
  const int k2c = input.channels() * g.kernel * g.kernel;
  const auto plane = static_cast<Eigen::Index>(grad_output.shape().plane());
  ConstMatrixMap dout(grad_output.data(), cout, plane);
  ConstMatrixMap col(cols.data(), k2c, plane);
  MatrixMap(grad_weight.data(), cout, k2c).noalias() += dout * col.transpose();
  add_row_sums(grad_output.data(), cout, static_cast<std::size_t>(plane), grad_bias.data());
  if (grad_input) {
    std::vector<double> dcol(static_cast<std::size_t>(k2c) * plane);
    MatrixMap(dcol.data(), k2c, plane).noalias() = ConstMatrixMap(weight.data(), cout, k2c).transpose() * dout;
    *grad_input = Tensor(input.shape(), 0.0);
    col2im(dcol.data(), input.shape(), g, grad_input->data());
  }
}

Tensor conv_transpose2d_forward(const Tensor& input, std::span<const double> weight,
                                std::span<const double> bias, int out_channels, ConvGeometry g) {
  const int cin = input.channels();
  const int k2o = out_channels * g.kernel * g.kernel;
  check_weight(weight, static_cast<std::size_t>(cin) * k2o);
  check_weight(bias, static_cast<std::size_t>(out_channels));
  const Shape out_shape{out_channels, g.transposed_size(input.height()), g.transposed_size(input.width())};
  if (g.output_size(out_shape.height) != input.height() || g.output_size(out_shape.width) != input.width()) {
    throw Error("transposed convolution geometry is not invertible");
  }
  const auto plane = static_cast<Eigen::Index>(input.shape().plane());
  std::vector<double> cols(static_cast<std::size_t>(k2o) * plane);
  MatrixMap(cols.data(), k2o, plane).noalias() =
      ConstMatrixMap(weight.data(), cin, k2o).transpose() * ConstMatrixMap(input.data(), cin, plane);
  Tensor out(out_shape, 0.0);
  col2im(cols.data(), out_shape, g, out.data());
  MatrixMap(out.data(), out_channels, static_cast<Eigen::Index>(out_shape.plane())).colwise() +=
      ConstVectorMap(bias.data(), out_channels);
  return out;
}

void conv_transpose2d_backward(const Tensor& input, std::span<const double> weight,
                               const Tensor& grad_output, ConvGeometry g, Tensor* grad_input,
                               std::span<double> grad_weight, std::span<double> grad_bias) {
  const int cin = input.channels();
  const int cout = grad_output.channels();
  const int k2o = cout * g.kernel * g.kernel;
  const auto plane = static_cast<Eigen::Index>(input.shape().plane());
  std::vector<double> dcols;
  im2col(grad_output.data(), grad_output.shape(), g, dcols);
  ConstMatrixMap dcol(dcols.data(), k2o, plane);
  MatrixMap(grad_weight.data(), cin, k2o).noalias() +=
      ConstMatrixMap(input.data(), cin, plane) * dcol.transpose();
  add_row_sums(grad_output.data(), cout, grad_output.shape().plane(), grad_bias.data());
  if (grad_input) {
    *grad_input = Tensor(input.shape());
    MatrixMap(grad_input->data(), cin, plane).noalias() = ConstMatrixMap(weight.data(), cin, k2o) * dcol;
  }
}

Tensor max_pool2x2_forward(const Tensor& input, std::vector<std::size_t>& argmax) {
  if (input.height() % 2 != 0 || input.width() % 2 != 0) {
    throw Error("max pool expects even spatial dimensions");
  }
  Tensor out(Shape{input.channels(), input.height() / 2, input.width() / 2});
  argmax.resize(out.shape().numel());
  std::size_t o = 0;
  for (int c = 0; c < input.channels(); ++c) {
    for (int y = 0; y < out.height(); ++y) {
      for (int x = 0; x < out.width(); ++x, ++o) {
        std::size_t best = 0;
        double best_value = -std::numeric_limits<double>::infinity();
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            const std::size_t idx =
                (static_cast<std::size_t>(c) * input.height() + 2 * y + dy) * input.width() + 2 * x + dx;
            if (input.data()[idx] > best_value) {
              best_value = input.data()[idx];
              best = idx;
            }
          }
        }
        out.data()[o] = best_value;
        argmax[o] = best;
      }
    }
  }
  return out;
}

void max_pool2x2_backward(const Tensor& grad_output, const std::vector<std::size_t>& argmax,
                          Tensor& grad_input) {
  for (std::size_t o = 0; o < argmax.size(); ++o) grad_input.data()[argmax[o]] += grad_output.data()[o];
}

Tensor relu_forward(const Tensor& input) {
  Tensor out(input.shape());
  const std::size_t n = input.values().size();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = std::max(input.data()[i], 0.0);
  return out;
}

void relu_backward(const Tensor& output, const Tensor& grad_output, Tensor& grad_input) {
  const std::size_t n = output.values().size();
  for (std::size_t i = 0; i < n; ++i) {
    grad_input.data()[i] = output.data()[i] > 0.0 ? grad_output.data()[i] : 0.0;
  }
}

Tensor concat_channels(std::span<const Tensor* const> inputs) {
  if (inputs.empty()) throw Error("concat needs at least one input");
  Shape shape = inputs[0]->shape();
  shape.channels = 0;
  for (const Tensor* t : inputs) {
    if (t->height() != shape.height || t->width() != shape.width) {
      throw Error("concat inputs differ in spatial size");
    }
    shape.channels += t->channels();
  }
  Tensor out(shape);
  double* dst = out.data();
  for (const Tensor* t : inputs) dst = std::copy(t->data(), t->data() + t->values().size(), dst);
  return out;
}

}  // namespace lsc::nn
