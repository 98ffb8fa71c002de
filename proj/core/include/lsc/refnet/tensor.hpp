#pragma once

#include <cstddef>
#include <vector>

#include "lsc/types.hpp"

namespace lsc::nn {

struct Shape {
  int channels = 0;
  int height = 0;
  int width = 0;

  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  std::size_t numel() const { return plane() * channels; }

  friend bool operator==(const Shape&, const Shape&) = default;
};

/// Dense (channels, height, width) activation map, row-major per channel.
class Tensor {
public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0) : shape_(shape), data_(shape.numel(), fill) {}

  const Shape& shape() const { return shape_; }
  int channels() const { return shape_.channels; }
  int height() const { return shape_.height; }
  int width() const { return shape_.width; }

  double& at(int c, int y, int x) { return data_[offset(c, y, x)]; }
  double at(int c, int y, int x) const { return data_[offset(c, y, x)]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  bool empty() const { return data_.empty(); }

  friend bool operator==(const Tensor&, const Tensor&) = default;

private:
  std::size_t offset(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * shape_.height + y) * shape_.width + x;
  }

  Shape shape_;
  std::vector<double> data_;
};

/// Copy `image` into a zero canvas of the frame's padded size.
Tensor pad_to_frame(const Tensor& image, const ImageFrame& frame);

}  // namespace lsc::nn
