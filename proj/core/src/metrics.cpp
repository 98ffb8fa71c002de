#include "lsc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lsc/assignment.hpp"

namespace lsc {
namespace {

void require_records(std::span<const EvalRecord> records, const char* metric) {
  if (records.empty()) throw Error(std::string(metric) + " needs at least one record");
}

}  // namespace

EvalRecord make_record(const std::vector<Detection>& detections, const PointAnnotationSet& annotations) {
  EvalRecord r;
  r.image_id = annotations.image_id;
  r.width = annotations.width;
  r.height = annotations.height;
  r.gt_points = annotations.points;
  r.detections = detections;
  r.predicted_points.reserve(detections.size());
  for (const auto& d : detections) r.predicted_points.push_back({d.center_x, d.center_y});
  return r;
}

double mae(std::span<const EvalRecord> records) {
  require_records(records, "MAE");
  double sum = 0.0;
  for (const auto& r : records) sum += std::abs(r.predicted_count() - r.gt_count());
  return sum / static_cast<double>(records.size());
}

double mse(std::span<const EvalRecord> records) {
  require_records(records, "MSE");
  double sum = 0.0;
  for (const auto& r : records) {
    const double e = r.predicted_count() - r.gt_count();
    sum += e * e;
  }
  return std::sqrt(sum / static_cast<double>(records.size()));
}

double game(std::span<const EvalRecord> records, int level) {
  require_records(records, "GAME");
  if (level < 0) throw Error("GAME level must be non-negative");
  if (level > 15) throw Error("GAME level too large");
  const int cells = 1 << level;
  double total = 0.0;
  for (const auto& r : records) {
    if (r.width <= 0 || r.height <= 0) throw Error("GAME needs image dimensions for '" + r.image_id + "'");
    std::vector<long> diff(static_cast<std::size_t>(cells) * cells, 0);
    const auto cell_of = [&](const Point& p) {
      const int cx = std::clamp(static_cast<int>(std::floor(p.x * cells / r.width)), 0, cells - 1);
      const int cy = std::clamp(static_cast<int>(std::floor(p.y * cells / r.height)), 0, cells - 1);
      return static_cast<std::size_t>(cy) * cells + cx;
    };
    for (const auto& p : r.predicted_points) ++diff[cell_of(p)];
    for (const auto& p : r.gt_points) --diff[cell_of(p)];
    long err = 0;
    for (long d : diff) err += std::labs(d);
    total += static_cast<double>(err);
  }
  return total / static_cast<double>(records.size());
}

double localization_cost(std::span<const Point> predicted, std::span<const Point> gt, double penalty) {
  // Rows are the smaller side. A pair beyond the gate costs two penalties,
  // exactly what leaving both points unmatched would cost.
  const bool pred_rows = predicted.size() <= gt.size();
  const auto rows = pred_rows ? predicted : gt;
  const auto cols = pred_rows ? gt : predicted;
  const int n = static_cast<int>(rows.size());
  const int m = static_cast<int>(cols.size());
  std::vector<double> cost(static_cast<std::size_t>(n) * m);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      const double d = std::hypot(rows[i].x - cols[j].x, rows[i].y - cols[j].y);
      cost[static_cast<std::size_t>(i) * m + j] = d <= penalty ? d : 2.0 * penalty;
    }
  }
  const auto match = min_cost_assignment(cost, n, m);
  double total = penalty * static_cast<double>(m - n);
  for (int i = 0; i < n; ++i) total += cost[static_cast<std::size_t>(i) * m + match[i]];
  return total;
}

double mle(std::span<const EvalRecord> records, double penalty) {
  require_records(records, "MLE");
  double total = 0.0;
  for (const auto& r : records) {
    const double c = localization_cost(r.predicted_points, r.gt_points, penalty);
    const int norm = std::max({r.predicted_count(), r.gt_count(), 1});
    total += c / norm;
  }
  return total / static_cast<double>(records.size());
}

double detection_map(std::span<const EvalRecord> records, double iou_threshold) {
  std::size_t n_gt = 0;
  for (const auto& r : records) n_gt += r.gt_boxes.size();
  if (n_gt == 0) throw Error("mAP needs ground-truth boxes");

  struct Ranked {
    double confidence;
    std::size_t image;
    std::size_t index;
  };
  std::vector<Ranked> ranked;
  for (std::size_t i = 0; i < records.size(); ++i) {
    for (std::size_t k = 0; k < records[i].detections.size(); ++k) {
      ranked.push_back({records[i].detections[k].confidence, i, k});
    }
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const Ranked& a, const Ranked& b) { return a.confidence > b.confidence; });

  std::vector<std::vector<char>> taken(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) taken[i].assign(records[i].gt_boxes.size(), 0);

  std::vector<double> precision, recall;
  std::size_t tp = 0;
  for (std::size_t rank = 0; rank < ranked.size(); ++rank) {
    const auto& [conf, img, idx] = ranked[rank];
    const Box box = records[img].detections[idx].bounds();
    int best = -1;
    double best_iou = iou_threshold;
    for (std::size_t g = 0; g < records[img].gt_boxes.size(); ++g) {
      if (taken[img][g]) continue;
      const double o = iou(box, records[img].gt_boxes[g]);
      if (o >= best_iou) {
        if (best < 0 || o > best_iou) {
          best = static_cast<int>(g);
          best_iou = o;
        }
      }
    }
    if (best >= 0) {
      taken[img][best] = 1;
      ++tp;
    }
    precision.push_back(static_cast<double>(tp) / static_cast<double>(rank + 1));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(n_gt));
  }

  // All-point interpolation: precision envelope integrated over recall.
  for (std::size_t i = precision.size(); i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < recall.size(); ++i) {
    ap += (recall[i] - prev_recall) * precision[i];
    prev_recall = recall[i];
  }
  return ap;
}

namespace {

void tally_accuracy(const LabelGridSet& predicted, const LabelGridSet& gt, std::size_t& total,
                    std::size_t& correct) {
  if (predicted.scales.size() != gt.scales.size()) throw Error("box accuracy: scale counts differ");
  for (std::size_t s = 0; s < gt.scales.size(); ++s) {
    const auto& p = predicted.scales[s];
    const auto& g = gt.scales[s];
    if (p.width() != g.width() || p.height() != g.height()) throw Error("box accuracy: grid shapes differ");
    for (std::size_t i = 0; i < g.cells().size(); ++i) {
      if (g.cells()[i] == 0) continue;
      ++total;
      correct += p.cells()[i] == g.cells()[i];
    }
  }
}

}  // namespace

double box_class_accuracy(const LabelGridSet& predicted, const LabelGridSet& gt) {
  return box_class_accuracy(std::span<const LabelGridSet>(&predicted, 1), std::span<const LabelGridSet>(&gt, 1));
}

double box_class_accuracy(std::span<const LabelGridSet> predicted, std::span<const LabelGridSet> gt) {
  if (predicted.size() != gt.size()) throw Error("box accuracy: dataset sizes differ");
  std::size_t total = 0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) tally_accuracy(predicted[i], gt[i], total, correct);
  if (total == 0) throw Error("box accuracy: ground truth has no head cells");
  return static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace lsc
