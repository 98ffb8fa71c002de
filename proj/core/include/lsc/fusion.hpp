#pragma once

#include <span>
#include <vector>

#include "lsc/box_catalog.hpp"
#include "lsc/grids.hpp"
#include "lsc/types.hpp"

namespace lsc {

enum class OverlapMeasure {
  IoU,                  // intersection over union
  IntersectionOverMin,  // intersection over the smaller box
};

const char* overlap_measure_name(OverlapMeasure m);
OverlapMeasure parse_overlap_measure(const std::string& name);

struct NmsConfig {
  double threshold = 0.3;
  OverlapMeasure measure = OverlapMeasure::IoU;

  void validate() const;
  friend bool operator==(const NmsConfig&, const NmsConfig&) = default;
};

double overlap(const Box& a, const Box& b, OverlapMeasure measure);

/// One detection per cell whose arg-max channel is a box class. Centers are
/// cell centers mapped back to input pixels (the frame offset removed).
std::vector<Detection> decode(const ScoreGridSet& scores, const BoxCatalog& catalog, const ImageFrame& frame);

/// Strict total order used by suppression: confidence descending, then
/// (y, x, scale, box) ascending.
bool detection_before(const Detection& a, const Detection& b);

/// Greedy suppression: keep the best remaining detection and drop every
/// other one that overlaps it by more than the threshold. Output follows
/// detection_before.
std::vector<Detection> nms(std::span<const Detection> detections, const NmsConfig& config);

struct FusionResult {
  std::vector<Detection> detections;
  int count = 0;
};

FusionResult fuse_and_count(const ScoreGridSet& scores, const BoxCatalog& catalog, const ImageFrame& frame,
                            const NmsConfig& config);

struct ThresholdSearch {
  double lower = 0.2;
  double upper = 0.3;
  double step = 0.01;
};

struct ThresholdResult {
  double threshold = 0.0;
  double mae = 0.0;
  std::vector<double> candidates;  // thresholds tried, in order
  std::vector<double> maes;        // validation MAE for each candidate
};

/// Picks the NMS threshold minimising validation MAE over the candidate grid;
/// the smaller threshold wins ties. `decoded` holds pre-NMS detections.
ThresholdResult threshold_search(std::span<const std::vector<Detection>> decoded, std::span<const int> gt_counts,
                                 const ThresholdSearch& range = {},
                                 OverlapMeasure measure = OverlapMeasure::IoU);

}  // namespace lsc
