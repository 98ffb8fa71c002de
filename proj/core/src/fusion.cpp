#include "lsc/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace lsc {

const char* overlap_measure_name(OverlapMeasure m) {
  return m == OverlapMeasure::IoU ? "iou" : "intersection_over_min";
}

OverlapMeasure parse_overlap_measure(const std::string& name) {
  if (name == "iou") return OverlapMeasure::IoU;
  if (name == "intersection_over_min") return OverlapMeasure::IntersectionOverMin;
  throw Error("unknown overlap measure '" + name + "'");
}

void NmsConfig::validate() const {
  if (!(threshold > 0.0 && threshold < 1.0)) throw Error("NMS threshold must lie in (0, 1)");
}

double overlap(const Box& a, const Box& b, OverlapMeasure measure) {
  if (measure == OverlapMeasure::IoU) return iou(a, b);
  const double smaller = std::min(a.area(), b.area());
  return smaller > 0.0 ? intersection_area(a, b) / smaller : 0.0;
}

std::vector<Detection> decode(const ScoreGridSet& scores, const BoxCatalog& catalog, const ImageFrame& frame) {
  if (static_cast<int>(scores.size()) != catalog.n_scales()) {
    throw Error("score grids do not match the catalog's scale count");
  }
  std::vector<Detection> out;
  for (int s = 0; s < catalog.n_scales(); ++s) {
    const auto& g = scores[s];
    if (g.channels() != catalog.n_boxes() + 1) throw Error("score channels do not match the catalog");
    const int stride = catalog.stride(s);
    for (int y = 0; y < g.height(); ++y) {
      for (int x = 0; x < g.width(); ++x) {
        const int cls = g.argmax(x, y);
        if (cls == 0) continue;
        Detection d;
        d.center_x = (x + 0.5) * stride - frame.offset_x;
        d.center_y = (y + 0.5) * stride - frame.offset_y;
        d.side = catalog.beta(s, cls);
        d.scale = s;
        d.box = cls;
        d.confidence = g.at(cls, x, y);
        out.push_back(d);
      }
    }
  }
  return out;
}

bool detection_before(const Detection& a, const Detection& b) {
  if (a.confidence != b.confidence) return a.confidence > b.confidence;
  if (a.center_y != b.center_y) return a.center_y < b.center_y;
  if (a.center_x != b.center_x) return a.center_x < b.center_x;
  if (a.scale != b.scale) return a.scale < b.scale;
  if (a.box != b.box) return a.box < b.box;
  return a.side < b.side;
}

std::vector<Detection> nms(std::span<const Detection> detections, const NmsConfig& config) {
  config.validate();
  std::vector<Detection> sorted(detections.begin(), detections.end());
  std::sort(sorted.begin(), sorted.end(), detection_before);
  std::vector<Box> boxes;
  boxes.reserve(sorted.size());
  for (const auto& d : sorted) boxes.push_back(d.bounds());

  std::vector<char> removed(sorted.size(), 0);
  std::vector<Detection> kept;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (removed[i]) continue;
    kept.push_back(sorted[i]);
    for (std::size_t j = i + 1; j < sorted.size(); ++j) {
      if (!removed[j] && overlap(boxes[i], boxes[j], config.measure) > config.threshold) removed[j] = 1;
    }
  }
  return kept;
}

FusionResult fuse_and_count(const ScoreGridSet& scores, const BoxCatalog& catalog, const ImageFrame& frame,
                            const NmsConfig& config) {
  FusionResult r;
  r.detections = nms(decode(scores, catalog, frame), config);
  r.count = static_cast<int>(r.detections.size());
  return r;
}

ThresholdResult threshold_search(std::span<const std::vector<Detection>> decoded, std::span<const int> gt_counts,
                                 const ThresholdSearch& range, OverlapMeasure measure) {
  if (decoded.empty()) throw Error("threshold search needs a non-empty validation set");
  if (decoded.size() != gt_counts.size()) throw Error("threshold search: one ground-truth count per image");
  if (!(range.step > 0.0) || range.upper < range.lower) throw Error("threshold search: invalid range");

  ThresholdResult result;
  result.mae = std::numeric_limits<double>::infinity();
  const int n = static_cast<int>(std::floor((range.upper - range.lower) / range.step + 1e-9));
  for (int i = 0; i <= n; ++i) {
    // Rounded to 1e-9 so that 0.2 + 5 * 0.01 prints and compares as 0.25.
    const double t = std::round((range.lower + i * range.step) * 1e9) / 1e9;
    const NmsConfig cfg{t, measure};
    double err = 0.0;
    for (std::size_t k = 0; k < decoded.size(); ++k) {
      err += std::abs(static_cast<double>(nms(decoded[k], cfg).size()) - gt_counts[k]);
    }
    err /= static_cast<double>(decoded.size());
    result.candidates.push_back(t);
    result.maes.push_back(err);
    if (err < result.mae) {
      result.mae = err;
      result.threshold = t;
    }
  }
  return result;
}

}  // namespace lsc
