#pragma once

#include <span>
#include <vector>

#include "lsc/types.hpp"

namespace lsc {

/// Topology limit: taps exist at strides 16, 8, 4 and 2.
inline constexpr int kMaxScales = 4;
inline constexpr int kCoarsestStride = 16;

/// Stride of scale s; s = 0 is the coarsest (1/16) branch.
int stride_of(int scale);

/// Predefined square box sides, n_boxes per scale.
///
/// Scale n_scales-1 (the finest) starts at side 1 and grows by gamma[s]; each
/// coarser scale continues from the largest side of the next finer scale.
/// Sides are exact integers.
class BoxCatalog {
public:
  static BoxCatalog build(int n_scales, int n_boxes, std::vector<int> gamma);

  int n_scales() const { return n_scales_; }
  int n_boxes() const { return n_boxes_; }
  std::span<const int> gamma() const { return gamma_; }

  /// Side of box b (1-based) at scale s.
  int beta(int scale, int box) const;
  int stride(int scale) const;

  /// Smallest and largest side over the whole catalog.
  int min_side() const { return beta(n_scales_ - 1, 1); }
  int max_side() const { return beta(0, n_boxes_); }

  friend bool operator==(const BoxCatalog&, const BoxCatalog&) = default;

private:
  BoxCatalog() = default;

  int n_scales_ = 0;
  int n_boxes_ = 0;
  std::vector<int> gamma_;
  std::vector<int> beta_;  // [scale * n_boxes + (box - 1)]
};

struct GridShape {
  int width = 0;
  int height = 0;

  friend bool operator==(const GridShape&, const GridShape&) = default;
};

/// Ceiling division of the image size by the stride of `scale`.
GridShape grid_shape(int width, int height, int scale);

}  // namespace lsc
