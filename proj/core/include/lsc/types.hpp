#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace lsc {

/// Raised for every contract violation in the library (bad shapes, empty
/// inputs, malformed files). The message is meant to be shown to a user.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Sub-pixel image location. x is the column axis, y the row axis, origin top-left.
struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

/// Head annotations of one image; the only supervision the pipeline consumes.
struct PointAnnotationSet {
  std::string image_id;
  int width = 0;
  int height = 0;
  std::vector<Point> points;

  /// Throws lsc::Error unless dimensions are positive and every point lies
  /// inside [0, width) x [0, height).
  void validate() const;
};

/// Axis-aligned box in input pixels, [x0, x1) x [y0, y1).
struct Box {
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 0.0;
  double y1 = 0.0;

  double area() const { return (x1 - x0) * (y1 - y0); }
};

double intersection_area(const Box& a, const Box& b);
double iou(const Box& a, const Box& b);

/// A located, sized head.
struct Detection {
  double center_x = 0.0;
  double center_y = 0.0;
  int side = 0;
  int scale = 0;
  int box = 0;
  double confidence = 0.0;

  Box bounds() const {
    const double half = 0.5 * side;
    return {center_x - half, center_y - half, center_x + half, center_y + half};
  }

  friend bool operator==(const Detection&, const Detection&) = default;
};

/// Dense row-major 2-D grid.
template <class T>
class Grid {
public:
  Grid() = default;
  Grid(int width, int height, T fill = T{})
      : width_(width), height_(height), cells_(static_cast<std::size_t>(width) * height, fill) {
    if (width < 0 || height < 0) throw Error("grid dimensions must be non-negative");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return cells_.size(); }

  T& at(int x, int y) { return cells_[index(x, y)]; }
  const T& at(int x, int y) const { return cells_[index(x, y)]; }

  std::vector<T>& cells() { return cells_; }
  const std::vector<T>& cells() const { return cells_; }

  friend bool operator==(const Grid&, const Grid&) = default;

private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * width_ + x;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> cells_;
};

/// Placement of an image inside the zero-padded frame the network sees.
/// Padding is split symmetrically (the odd pixel goes right / bottom).
struct ImageFrame {
  int width = 0;
  int height = 0;
  int padded_width = 0;
  int padded_height = 0;
  int offset_x = 0;
  int offset_y = 0;

  /// Frame padded up to the next multiple of `multiple` in both axes.
  static ImageFrame padded_to(int width, int height, int multiple = 16);

  friend bool operator==(const ImageFrame&, const ImageFrame&) = default;
};

}  // namespace lsc
