#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "lsc/box_catalog.hpp"
#include "lsc/grids.hpp"
#include "lsc/types.hpp"

namespace lsc {

/// Size of a head with no neighbour (single-point image).
inline constexpr double kInfiniteSize = std::numeric_limits<double>::infinity();

/// Pseudo head size per annotated point, in the order of the input points.
struct SizeField {
  std::vector<double> sizes;
};

/// Distance from each point to its nearest other point; kInfiniteSize when
/// the set holds exactly one point. Duplicated points get size 0.
SizeField nearest_neighbor_sizes(std::span<const Point> points);
SizeField nearest_neighbor_sizes(const PointAnnotationSet& annotations);

struct BoxAssignment {
  int scale = 0;
  int box = 0;

  friend bool operator==(const BoxAssignment&, const BoxAssignment&) = default;
};

/// Bin a pseudo size into the catalog. All sides form one increasing
/// sequence from the finest scale to the coarsest; bins are half-open
/// [side_k, side_k+1) and the two ends clamp.
BoxAssignment assign_box(double size, const BoxCatalog& catalog);

/// Rank of an assignment in the global bin order (0 = smallest box).
int global_bin(const BoxAssignment& a, const BoxCatalog& catalog);

/// Writes every head at exactly one scale. When two heads meet in one cell
/// the smaller pseudo size wins, then the smaller (y, x).
LabelGridSet assign_boxes(const SizeField& sizes, const PointAnnotationSet& annotations,
                          const BoxCatalog& catalog);

/// Convenience: sizes + assignment for one image.
LabelGridSet generate_pseudo_gt(const PointAnnotationSet& annotations, const BoxCatalog& catalog);

/// Frequency of every (scale, class) over a dataset.
class ClassCountTable {
public:
  ClassCountTable(int n_scales, int n_boxes);

  int n_scales() const { return n_scales_; }
  int n_boxes() const { return n_boxes_; }

  std::int64_t& at(int scale, int cls) { return counts_[index(scale, cls)]; }
  std::int64_t at(int scale, int cls) const { return counts_[index(scale, cls)]; }

  /// Sum of box classes (b >= 1) at a scale.
  std::int64_t box_sum(int scale) const;
  /// Minimum of box_sum over scales.
  std::int64_t min_box_sum() const;

  ClassCountTable& operator+=(const ClassCountTable& other);
  friend bool operator==(const ClassCountTable&, const ClassCountTable&) = default;

private:
  std::size_t index(int scale, int cls) const;

  int n_scales_ = 0;
  int n_boxes_ = 0;
  std::vector<std::int64_t> counts_;
};

ClassCountTable count_classes(std::span<const LabelGridSet> dataset, const BoxCatalog& catalog);

/// Class-balancing weights: alpha[s][b] = (c_min / c_sum[s]) * min(c0[s] / c[s][b], 10),
/// background alpha[s][0] = c_min / c_sum[s].
inline constexpr double kMaxBackgroundRatio = 10.0;
ClassWeightTable class_weights(const ClassCountTable& counts);

/// Weights for the winner-cell loss: as class_weights with each c_sum[s]
/// rescaled by 4^-s to account for the growth of the map with scale.
ClassWeightTable gwta_class_weights(const ClassCountTable& counts);

}  // namespace lsc
