#pragma once

#include <span>
#include <string>
#include <vector>

#include "lsc/grids.hpp"
#include "lsc/types.hpp"

namespace lsc {

/// Predictions and ground truth of one evaluated image. Counts are the
/// sizes of the point lists.
struct EvalRecord {
  std::string image_id;
  int width = 0;
  int height = 0;
  std::vector<Point> predicted_points;
  std::vector<Point> gt_points;
  std::vector<Detection> detections;  // boxes with confidences, for mAP
  std::vector<Box> gt_boxes;          // empty when the data has no boxes

  int predicted_count() const { return static_cast<int>(predicted_points.size()); }
  int gt_count() const { return static_cast<int>(gt_points.size()); }
};

/// Record from fused detections and the image's annotations.
EvalRecord make_record(const std::vector<Detection>& detections, const PointAnnotationSet& annotations);

double mae(std::span<const EvalRecord> records);
/// Root mean squared count error.
double mse(std::span<const EvalRecord> records);

/// Grid average mean absolute error over a 2^L x 2^L partition of each image;
/// points are binned by location. GAME(0) equals MAE.
double game(std::span<const EvalRecord> records, int level);

inline constexpr double kLocalizationPenalty = 16.0;

/// Optimal one-to-one matching cost of one image: matched pairs cost their
/// distance (pairs farther than `penalty` may not match), every unmatched
/// point on either side costs `penalty`. Not normalised.
double localization_cost(std::span<const Point> predicted, std::span<const Point> gt,
                         double penalty = kLocalizationPenalty);

/// Mean localization error: per image localization_cost / max(n_pred, n_gt, 1),
/// averaged over images.
double mle(std::span<const EvalRecord> records, double penalty = kLocalizationPenalty);

/// Average precision at a single IoU threshold with all-point interpolation.
double detection_map(std::span<const EvalRecord> records, double iou_threshold = 0.5);

/// Fraction of ground-truth head cells whose predicted class matches.
double box_class_accuracy(const LabelGridSet& predicted, const LabelGridSet& gt);
/// Dataset version: pooled over all head cells of all images.
double box_class_accuracy(std::span<const LabelGridSet> predicted, std::span<const LabelGridSet> gt);

}  // namespace lsc
