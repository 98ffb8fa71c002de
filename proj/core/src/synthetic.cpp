#include "lsc/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

#include "lsc/pseudo_gt.hpp"
#include "lsc/random.hpp"

namespace lsc::synth {
namespace {

struct Cell {
  int scale;
  int x;
  int y;
  auto operator<=>(const Cell&) const = default;
};

Cell cell_of(const Point& p, const BoxAssignment& a, const BoxCatalog& catalog, const ImageFrame& frame) {
  const int stride = catalog.stride(a.scale);
  return {a.scale, static_cast<int>(std::floor((p.x + frame.offset_x) / stride)),
          static_cast<int>(std::floor((p.y + frame.offset_y) / stride))};
}

// Indices of heads that lose a cell collision.
std::vector<std::size_t> collision_losers(const PointAnnotationSet& a, const SizeField& sizes,
                                          const BoxCatalog& catalog, const ImageFrame& frame) {
  std::map<Cell, std::size_t> owner;
  std::vector<std::size_t> losers;
  const auto& pts = a.points;
  const auto beats = [&](std::size_t i, std::size_t j) {
    return std::tie(sizes.sizes[i], pts[i].y, pts[i].x) < std::tie(sizes.sizes[j], pts[j].y, pts[j].x);
  };
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Cell c = cell_of(pts[i], assign_box(sizes.sizes[i], catalog), catalog, frame);
    auto [it, inserted] = owner.emplace(c, i);
    if (inserted) continue;
    if (beats(i, it->second)) {
      losers.push_back(it->second);
      it->second = i;
    } else {
      losers.push_back(i);
    }
  }
  return losers;
}

// Indices of heads whose one-hot detection is suppressed by fusion.
std::vector<std::size_t> suppressed_heads(const PointAnnotationSet& a, const SizeField& sizes,
                                          const BoxCatalog& catalog, const ImageFrame& frame, const NmsConfig& nms_cfg) {
  const auto grids = assign_boxes(sizes, a, catalog);
  const auto fused = fuse_and_count(one_hot_scores(grids, catalog.n_boxes()), catalog, frame, nms_cfg);
  std::map<Cell, std::size_t> head_at;
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    head_at.emplace(cell_of(a.points[i], assign_box(sizes.sizes[i], catalog), catalog, frame), i);
  }
  std::map<Cell, bool> kept;
  for (const auto& d : fused.detections) {
    const int stride = catalog.stride(d.scale);
    kept[{d.scale, static_cast<int>(std::floor((d.center_x + frame.offset_x) / stride)),
          static_cast<int>(std::floor((d.center_y + frame.offset_y) / stride))}] = true;
  }
  std::vector<std::size_t> out;
  for (const auto& [cell, idx] : head_at) {
    if (!kept.count(cell)) out.push_back(idx);
  }
  return out;
}

void erase_indices(std::vector<Point>& pts, std::vector<std::size_t> idx) {
  std::sort(idx.begin(), idx.end());
  idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
  for (auto it = idx.rbegin(); it != idx.rend(); ++it) pts.erase(pts.begin() + static_cast<std::ptrdiff_t>(*it));
}

}  // namespace

double head_radius(double pseudo_size) {
  if (!std::isfinite(pseudo_size)) return 8.0;
  return std::clamp(0.42 * pseudo_size, 0.6, 8.0);
}

bool fusion_round_trips(const PointAnnotationSet& annotations, const BoxCatalog& catalog, const NmsConfig& nms) {
  const auto frame = ImageFrame::padded_to(annotations.width, annotations.height, kCoarsestStride);
  const auto sizes = nearest_neighbor_sizes(annotations);
  if (!collision_losers(annotations, sizes, catalog, frame).empty()) return false;
  return suppressed_heads(annotations, sizes, catalog, frame, nms).empty();
}

void make_round_trip_clean(PointAnnotationSet& annotations, const BoxCatalog& catalog, const NmsConfig& nms) {
  const auto frame = ImageFrame::padded_to(annotations.width, annotations.height, kCoarsestStride);
  while (!annotations.points.empty()) {
    const auto sizes = nearest_neighbor_sizes(annotations);
    auto losers = collision_losers(annotations, sizes, catalog, frame);
    if (losers.empty()) losers = suppressed_heads(annotations, sizes, catalog, frame, nms);
    if (losers.empty()) return;
    erase_indices(annotations.points, std::move(losers));
  }
}

nn::Tensor render(const PointAnnotationSet& annotations, std::uint64_t seed, double noise) {
  SplitMix64 rng(seed ^ 0x5DEECE66DULL);
  const int w = annotations.width;
  const int h = annotations.height;
  nn::Tensor img(nn::Shape{3, h, w});
  const double phase = rng.uniform(0.0, 6.28);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double base = 0.12 + 0.04 * std::sin(phase + 0.02 * x + 0.013 * y);
      for (int c = 0; c < 3; ++c) img.at(c, y, x) = base + noise * rng.normal();
    }
  }
  const auto sizes = nearest_neighbor_sizes(annotations);
  const double tint[3] = {0.95, 0.85, 0.75};
  for (std::size_t i = 0; i < annotations.points.size(); ++i) {
    const Point& p = annotations.points[i];
    const double r = head_radius(sizes.sizes[i]);
    const int x0 = std::max(0, static_cast<int>(std::floor(p.x - r - 2)));
    const int x1 = std::min(w - 1, static_cast<int>(std::ceil(p.x + r + 2)));
    const int y0 = std::max(0, static_cast<int>(std::floor(p.y - r - 2)));
    const int y1 = std::min(h - 1, static_cast<int>(std::ceil(p.y + r + 2)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double d = std::hypot(x + 0.5 - p.x, y + 0.5 - p.y);
        const double v = 1.0 / (1.0 + std::exp((d - r) / 0.35));
        for (int c = 0; c < 3; ++c) img.at(c, y, x) = std::max(img.at(c, y, x), tint[c] * v);
      }
    }
  }
  for (auto& v : img.values()) v = std::clamp(v, 0.0, 1.0);
  return img;
}

Scene make_scene(std::uint64_t seed, const SceneOptions& o, const BoxCatalog& catalog, const std::string& image_id,
                 const NmsConfig& nms) {
  SplitMix64 rng(seed);
  Scene scene;
  auto& a = scene.annotations;
  a.image_id = image_id;
  a.width = o.width;
  a.height = o.height;

  struct Rect {
    double x0, y0, x1, y1;
  };
  std::vector<Rect> rects;
  const int clusters = o.min_clusters + static_cast<int>(rng.below(o.max_clusters - o.min_clusters + 1));
  for (int c = 0, tries = 0; c < clusters && tries < 200; ++tries) {
    const double spacing = std::exp(rng.uniform(std::log(o.min_spacing), std::log(o.max_spacing)));
    double side_hi = o.max_cluster_side;
    if (o.max_cluster_rows > 0) side_hi = std::min(side_hi, o.max_cluster_rows * spacing);
    const double side_lo = std::min(3.0 * spacing, side_hi);
    const double side_x = rng.uniform(side_lo, side_hi);
    const double side_y = rng.uniform(side_lo, side_hi);
    const double x0 = rng.uniform(2.0, o.width - side_x - 2.0);
    const double y0 = rng.uniform(2.0, o.height - side_y - 2.0);
    const Rect r{x0, y0, x0 + side_x, y0 + side_y};
    const double gap = 2.0 * o.max_spacing;
    const bool clash = std::any_of(rects.begin(), rects.end(), [&](const Rect& q) {
      return r.x0 < q.x1 + gap && q.x0 < r.x1 + gap && r.y0 < q.y1 + gap && q.y0 < r.y1 + gap;
    });
    if (clash || x0 < 0 || y0 < 0) continue;
    rects.push_back(r);
    ++c;
    for (double y = r.y0; y < r.y1; y += spacing) {
      for (double x = r.x0; x < r.x1; x += spacing) {
        const double px = x + o.jitter * spacing * rng.uniform(-1.0, 1.0);
        const double py = y + o.jitter * spacing * rng.uniform(-1.0, 1.0);
        if (px >= 0.5 && py >= 0.5 && px < o.width - 0.5 && py < o.height - 0.5) a.points.push_back({px, py});
      }
    }
  }
  for (int k = 0, tries = 0; k < o.isolated_heads && tries < 500; ++tries) {
    const Point p{rng.uniform(8.0, o.width - 8.0), rng.uniform(8.0, o.height - 8.0)};
    const bool crowded = std::any_of(a.points.begin(), a.points.end(),
                                     [&](const Point& q) { return std::hypot(p.x - q.x, p.y - q.y) < 30.0; });
    if (crowded) continue;
    a.points.push_back(p);
    ++k;
  }
  make_round_trip_clean(a, catalog, nms);
  scene.image = render(a, seed, o.noise);
  return scene;
}

std::vector<Scene> make_dataset(int count, std::uint64_t seed, const SceneOptions& options, const BoxCatalog& catalog,
                                const NmsConfig& nms) {
  if (count < 1) throw Error("dataset needs at least one scene");
  for (int attempt = 0; attempt < 64; ++attempt) {
    std::vector<Scene> scenes;
    std::vector<LabelGridSet> grids;
    for (int i = 0; i < count; ++i) {
      const std::uint64_t s = seed + 7919ULL * static_cast<std::uint64_t>(attempt) + static_cast<std::uint64_t>(i);
      scenes.push_back(make_scene(s, options, catalog, "synth_" + std::to_string(i), nms));
      grids.push_back(generate_pseudo_gt(scenes.back().annotations, catalog));
    }
    const auto counts = count_classes(grids, catalog);
    bool covered = true;
    for (int s = 0; s < catalog.n_scales(); ++s) {
      for (int b = 1; b <= catalog.n_boxes(); ++b) covered = covered && counts.at(s, b) > 0;
    }
    if (covered) return scenes;
  }
  throw Error("could not populate every box class; widen the spacing range");
}

PointAnnotationSet make_sparse_points(std::uint64_t seed, int width, int height, int heads, double min_gap,
                                      const std::string& image_id) {
  SplitMix64 rng(seed);
  PointAnnotationSet a;
  a.image_id = image_id;
  a.width = width;
  a.height = height;
  for (int tries = 0; static_cast<int>(a.points.size()) < heads && tries < 100 * heads + 100; ++tries) {
    const Point p{rng.uniform(0.0, width), rng.uniform(0.0, height)};
    const bool close = std::any_of(a.points.begin(), a.points.end(),
                                   [&](const Point& q) { return std::hypot(p.x - q.x, p.y - q.y) < min_gap; });
    if (!close) a.points.push_back(p);
  }
  return a;
}

}  // namespace lsc::synth
