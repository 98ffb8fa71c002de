#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lsc/box_catalog.hpp"
#include "lsc/fusion.hpp"
#include "lsc/refnet/tensor.hpp"
#include "lsc/types.hpp"

namespace lsc::synth {

/// Knobs of the synthetic crowd generator: heads are soft bright disks laid
/// out in jittered lattice clusters whose spacing sets the pseudo size.
struct SceneOptions {
  int width = 224;
  int height = 224;
  int min_clusters = 2;
  int max_clusters = 4;
  double min_spacing = 2.2;
  double max_spacing = 22.0;
  int max_cluster_side = 56;  // pixels
  int max_cluster_rows = 0;   // heads per cluster side, 0 = limited by max_cluster_side only
  int isolated_heads = 1;     // heads placed away from clusters
  double jitter = 0.12;       // fraction of the spacing
  double noise = 0.02;
};

struct Scene {
  PointAnnotationSet annotations;
  nn::Tensor image;  // (3, height, width), values in [0, 1]
};

/// Head radius drawn for a pseudo size; the appearance encodes the class.
double head_radius(double pseudo_size);

/// Points whose one-hot pseudo ground truth survives fusion intact: no two
/// heads share a cell and fused one-hot scores recover every head.
bool fusion_round_trips(const PointAnnotationSet& annotations, const BoxCatalog& catalog, const NmsConfig& nms);

/// Removes heads until the scene round-trips (colliding heads lose to the
/// collision winner; surplus suppressions drop the suppressed head).
void make_round_trip_clean(PointAnnotationSet& annotations, const BoxCatalog& catalog, const NmsConfig& nms);

/// Deterministic scene from a seed.
Scene make_scene(std::uint64_t seed, const SceneOptions& options, const BoxCatalog& catalog,
                 const std::string& image_id, const NmsConfig& nms = {});

/// Renders heads for given annotations (used by make_scene).
nn::Tensor render(const PointAnnotationSet& annotations, std::uint64_t seed, double noise);

/// `count` scenes that together populate every (scale, box) class.
std::vector<Scene> make_dataset(int count, std::uint64_t seed, const SceneOptions& options,
                                const BoxCatalog& catalog, const NmsConfig& nms = {});

/// Sparse scene for round-trip tests: `heads` points at least `min_gap` apart.
PointAnnotationSet make_sparse_points(std::uint64_t seed, int width, int height, int heads, double min_gap,
                                      const std::string& image_id);

}  // namespace lsc::synth
