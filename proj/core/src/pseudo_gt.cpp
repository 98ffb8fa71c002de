#include "lsc/pseudo_gt.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace lsc {
namespace {

// Points bucketed on a uniform grid; rings are searched outward until the
// ring's inner distance exceeds the best distance found.
class BucketIndex {
public:
  explicit BucketIndex(std::span<const Point> points) : points_(points) {
    double min_x = points[0].x, max_x = points[0].x;
    double min_y = points[0].y, max_y = points[0].y;
    for (const auto& p : points) {
      min_x = std::min(min_x, p.x);
      max_x = std::max(max_x, p.x);
      min_y = std::min(min_y, p.y);
      max_y = std::max(max_y, p.y);
    }
    origin_x_ = min_x;
    origin_y_ = min_y;
    const double extent = std::max({max_x - min_x, max_y - min_y, 1.0});
    const double per_axis = std::max(1.0, std::floor(std::sqrt(static_cast<double>(points.size()))));
    cell_ = extent / per_axis;
    nx_ = static_cast<int>((max_x - min_x) / cell_) + 1;
    ny_ = static_cast<int>((max_y - min_y) / cell_) + 1;
    start_.assign(static_cast<std::size_t>(nx_) * ny_ + 1, 0);
    for (const auto& p : points) ++start_[bucket_of(p) + 1];
    for (std::size_t i = 1; i < start_.size(); ++i) start_[i] += start_[i - 1];
    order_.resize(points.size());
    std::vector<std::size_t> fill(start_.begin(), start_.end() - 1);
    for (std::size_t i = 0; i < points.size(); ++i) order_[fill[bucket_of(points[i])]++] = i;
  }

  double nearest_squared(std::size_t query) const {
    const Point& q = points_[query];
    const int cx = cell_x(q.x);
    const int cy = cell_y(q.y);
    double best = std::numeric_limits<double>::infinity();
    const int max_ring = std::max(nx_, ny_);
    for (int ring = 0; ring <= max_ring; ++ring) {
      if (ring > 0) {
        const double reach = (ring - 1) * cell_;
        if (reach * reach > best) break;
      }
      for (int y = cy - ring; y <= cy + ring; ++y) {
        if (y < 0 || y >= ny_) continue;
        const bool edge_row = (y == cy - ring || y == cy + ring);
        for (int x = cx - ring; x <= cx + ring; x += (edge_row ? 1 : 2 * ring)) {
          if (x >= 0 && x < nx_) scan(static_cast<std::size_t>(y) * nx_ + x, query, best);
          if (ring == 0) break;
        }
      }
    }
    return best;
  }

private:
  int cell_x(double x) const { return std::clamp(static_cast<int>((x - origin_x_) / cell_), 0, nx_ - 1); }
  int cell_y(double y) const { return std::clamp(static_cast<int>((y - origin_y_) / cell_), 0, ny_ - 1); }
  std::size_t bucket_of(const Point& p) const {
    return static_cast<std::size_t>(cell_y(p.y)) * nx_ + cell_x(p.x);
  }

  void scan(std::size_t bucket, std::size_t query, double& best) const {
    const Point& q = points_[query];
    for (std::size_t k = start_[bucket]; k < start_[bucket + 1]; ++k) {
      const std::size_t j = order_[k];
      if (j == query) continue;
      const double dx = q.x - points_[j].x;
      const double dy = q.y - points_[j].y;
      best = std::min(best, dx * dx + dy * dy);
    }
  }

  std::span<const Point> points_;
  double origin_x_ = 0.0;
  double origin_y_ = 0.0;
  double cell_ = 1.0;
  int nx_ = 1;
  int ny_ = 1;
  std::vector<std::size_t> start_;
  std::vector<std::size_t> order_;
};

}  // namespace

SizeField nearest_neighbor_sizes(std::span<const Point> points) {
  SizeField field;
  if (points.empty()) return field;
  field.sizes.assign(points.size(), kInfiniteSize);
  if (points.size() == 1) return field;
  const BucketIndex index(points);
  for (std::size_t i = 0; i < points.size(); ++i) field.sizes[i] = std::sqrt(index.nearest_squared(i));
  return field;
}

SizeField nearest_neighbor_sizes(const PointAnnotationSet& annotations) {
  return nearest_neighbor_sizes(std::span<const Point>(annotations.points));
}

BoxAssignment assign_box(double size, const BoxCatalog& catalog) {
  const int n_s = catalog.n_scales();
  const int n_b = catalog.n_boxes();
  if (std::isnan(size)) throw Error("pseudo size is NaN");
  // Walk bins from the smallest side upward; the last side <= size wins.
  BoxAssignment result{n_s - 1, 1};
  for (int s = n_s - 1; s >= 0; --s) {
    for (int b = 1; b <= n_b; ++b) {
      if (static_cast<double>(catalog.beta(s, b)) <= size) {
        result = {s, b};
      } else {
        return result;
      }
    }
  }
  return result;
}

int global_bin(const BoxAssignment& a, const BoxCatalog& catalog) {
  return (catalog.n_scales() - 1 - a.scale) * catalog.n_boxes() + (a.box - 1);
}

LabelGridSet assign_boxes(const SizeField& sizes, const PointAnnotationSet& annotations,
                          const BoxCatalog& catalog) {
  annotations.validate();
  if (sizes.sizes.size() != annotations.points.size()) {
    throw Error("size field does not match the annotation count of '" + annotations.image_id + "'");
  }
  const auto frame = ImageFrame::padded_to(annotations.width, annotations.height, kCoarsestStride);
  LabelGridSet set = make_label_grids(frame, catalog.n_scales());

  // Owner of each occupied cell, to resolve collisions.
  std::vector<Grid<int>> owner;
  owner.reserve(set.scales.size());
  for (const auto& g : set.scales) owner.emplace_back(g.width(), g.height(), -1);

  const auto& pts = annotations.points;
  const auto beats = [&](std::size_t i, std::size_t j) {
    if (sizes.sizes[i] != sizes.sizes[j]) return sizes.sizes[i] < sizes.sizes[j];
    if (pts[i].y != pts[j].y) return pts[i].y < pts[j].y;
    return pts[i].x < pts[j].x;
  };

  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto a = assign_box(sizes.sizes[i], catalog);
    const int stride = catalog.stride(a.scale);
    const int cx = static_cast<int>(std::floor((pts[i].x + frame.offset_x) / stride));
    const int cy = static_cast<int>(std::floor((pts[i].y + frame.offset_y) / stride));
    int& own = owner[a.scale].at(cx, cy);
    if (own >= 0 && !beats(i, static_cast<std::size_t>(own))) continue;
    own = static_cast<int>(i);
    set.scales[a.scale].at(cx, cy) = a.box;
  }
  return set;
}

LabelGridSet generate_pseudo_gt(const PointAnnotationSet& annotations, const BoxCatalog& catalog) {
  return assign_boxes(nearest_neighbor_sizes(annotations), annotations, catalog);
}

ClassCountTable::ClassCountTable(int n_scales, int n_boxes)
    : n_scales_(n_scales), n_boxes_(n_boxes),
      counts_(static_cast<std::size_t>(n_scales) * (n_boxes + 1), 0) {}

std::size_t ClassCountTable::index(int scale, int cls) const {
  if (scale < 0 || scale >= n_scales_ || cls < 0 || cls > n_boxes_) {
    throw Error("class count index out of range");
  }
  return static_cast<std::size_t>(scale) * (n_boxes_ + 1) + cls;
}

std::int64_t ClassCountTable::box_sum(int scale) const {
  std::int64_t sum = 0;
  for (int b = 1; b <= n_boxes_; ++b) sum += at(scale, b);
  return sum;
}

std::int64_t ClassCountTable::min_box_sum() const {
  std::int64_t best = box_sum(0);
  for (int s = 1; s < n_scales_; ++s) best = std::min(best, box_sum(s));
  return best;
}

ClassCountTable& ClassCountTable::operator+=(const ClassCountTable& other) {
  if (other.n_scales_ != n_scales_ || other.n_boxes_ != n_boxes_) {
    throw Error("cannot add class counts of different catalogs");
  }
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  return *this;
}

ClassCountTable count_classes(std::span<const LabelGridSet> dataset, const BoxCatalog& catalog) {
  if (dataset.empty()) throw Error("cannot count classes of an empty dataset");
  ClassCountTable counts(catalog.n_scales(), catalog.n_boxes());
  for (const auto& set : dataset) {
    if (set.n_scales() != catalog.n_scales()) throw Error("label grids do not match the catalog");
    for (int s = 0; s < set.n_scales(); ++s) {
      for (int cls : set.scales[s].cells()) {
        if (cls < 0 || cls > catalog.n_boxes()) throw Error("label outside the catalog");
        ++counts.at(s, cls);
      }
    }
  }
  return counts;
}

namespace {

ClassWeightTable weights_from_sums(const ClassCountTable& counts, const std::vector<double>& sums) {
  ClassWeightTable table(counts.n_scales(), counts.n_boxes());
  for (int s = 0; s < counts.n_scales(); ++s) {
    for (int b = 1; b <= counts.n_boxes(); ++b) {
      if (counts.at(s, b) == 0) {
        throw Error("class weights undefined: box class (scale " + std::to_string(s) + ", box " +
                    std::to_string(b) + ") has no training samples");
      }
    }
  }
  const double c_min = *std::min_element(sums.begin(), sums.end());
  for (int s = 0; s < counts.n_scales(); ++s) {
    const double branch = c_min / sums[s];
    table.at(s, 0) = branch;
    const double background = static_cast<double>(counts.at(s, 0));
    for (int b = 1; b <= counts.n_boxes(); ++b) {
      const double ratio = background / static_cast<double>(counts.at(s, b));
      table.at(s, b) = branch * std::min(ratio, kMaxBackgroundRatio);
    }
  }
  return table;
}

}  // namespace

ClassWeightTable class_weights(const ClassCountTable& counts) {
  std::vector<double> sums(counts.n_scales());
  for (int s = 0; s < counts.n_scales(); ++s) sums[s] = static_cast<double>(counts.box_sum(s));
  return weights_from_sums(counts, sums);
}

ClassWeightTable gwta_class_weights(const ClassCountTable& counts) {
  std::vector<double> sums(counts.n_scales());
  for (int s = 0; s < counts.n_scales(); ++s) {
    sums[s] = std::ldexp(static_cast<double>(counts.box_sum(s)), -2 * s);
  }
  return weights_from_sums(counts, sums);
}

}  // namespace lsc
