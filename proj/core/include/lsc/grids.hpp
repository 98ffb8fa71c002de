#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "lsc/box_catalog.hpp"
#include "lsc/types.hpp"

namespace lsc {

/// Per-cell class index: 0 = background, 1..n_boxes = box class.
using LabelGrid = Grid<int>;

/// Pseudo ground truth of one image: one class grid per scale, laid out in
/// the padded frame the network predicts on.
struct LabelGridSet {
  ImageFrame frame;
  std::vector<LabelGrid> scales;  // index = scale s

  int n_scales() const { return static_cast<int>(scales.size()); }

  friend bool operator==(const LabelGridSet&, const LabelGridSet&) = default;
};

/// Empty (all-background) label grids for an image frame.
LabelGridSet make_label_grids(const ImageFrame& frame, int n_scales);

/// Channel-major per-cell confidences, shape (channels, height, width).
class ScoreGrid {
public:
  ScoreGrid() = default;
  ScoreGrid(int channels, int width, int height, double fill = 0.0);

  int channels() const { return channels_; }
  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t plane() const { return static_cast<std::size_t>(width_) * height_; }

  double& at(int c, int x, int y) { return values_[c * plane() + static_cast<std::size_t>(y) * width_ + x]; }
  double at(int c, int x, int y) const {
    return values_[c * plane() + static_cast<std::size_t>(y) * width_ + x];
  }

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  /// Channel index with the largest value at a cell; lowest index wins ties.
  int argmax(int x, int y) const;

  friend bool operator==(const ScoreGrid&, const ScoreGrid&) = default;

private:
  int channels_ = 0;
  int width_ = 0;
  int height_ = 0;
  std::vector<double> values_;
};

using ScoreGridSet = std::vector<ScoreGrid>;

/// Per-cell softmax over the channel axis, in place.
void softmax_channels(ScoreGrid& logits);

/// True when every cell's channels sum to one within `tol`.
bool is_normalized(const ScoreGridSet& scores, double tol = 1e-6);

/// One-hot confidences reproducing a label set exactly.
ScoreGridSet one_hot_scores(const LabelGridSet& labels, int n_boxes);

/// Per-cell argmax labels of a score set.
LabelGridSet argmax_labels(const ScoreGridSet& scores, const ImageFrame& frame);

/// Class weights alpha[s][b], b = 0 is background.
class ClassWeightTable {
public:
  ClassWeightTable() = default;
  ClassWeightTable(int n_scales, int n_boxes, double fill = 1.0);

  int n_scales() const { return n_scales_; }
  int n_boxes() const { return n_boxes_; }

  double& at(int scale, int cls) { return values_[index(scale, cls)]; }
  double at(int scale, int cls) const { return values_[index(scale, cls)]; }

  /// The 1 + n_boxes weights of one scale.
  std::span<const double> scale(int s) const {
    return {values_.data() + index(s, 0), static_cast<std::size_t>(n_boxes_ + 1)};
  }

  friend bool operator==(const ClassWeightTable&, const ClassWeightTable&) = default;

private:
  std::size_t index(int scale, int cls) const;

  int n_scales_ = 0;
  int n_boxes_ = 0;
  std::vector<double> values_;
};

}  // namespace lsc
