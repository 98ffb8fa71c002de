#pragma once

// Slow, obviously-correct reference implementations used only by tests.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "lsc/grids.hpp"
#include "lsc/gwta_loss.hpp"
#include "lsc/types.hpp"

namespace lsc::oracle {

/// O(n^2) nearest-neighbour distance per point.
inline std::vector<double> brute_force_nn(std::span<const Point> pts) {
  std::vector<double> out(pts.size(), std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < pts.size(); ++j) {
      if (i == j) continue;
      const double dx = pts[i].x - pts[j].x;
      const double dy = pts[i].y - pts[j].y;
      best = std::min(best, std::sqrt(dx * dx + dy * dy));
    }
    out[i] = best;
  }
  return out;
}

/// Exhaustive one-to-one matching cost: tries every injective map of the
/// smaller side into the larger side, with "unmatched" as an extra option.
inline double brute_force_localization(std::span<const Point> pred, std::span<const Point> gt, double penalty) {
  const auto dist = [](const Point& a, const Point& b) { return std::hypot(a.x - b.x, a.y - b.y); };
  std::vector<bool> used(gt.size(), false);
  double best = std::numeric_limits<double>::infinity();
  std::function<void(std::size_t, double, std::size_t)> rec = [&](std::size_t i, double cost, std::size_t matched) {
    if (cost >= best) return;
    if (i == pred.size()) {
      const double total = cost + penalty * static_cast<double>(gt.size() - matched);
      best = std::min(best, total);
      return;
    }
    rec(i + 1, cost + penalty, matched);
    for (std::size_t j = 0; j < gt.size(); ++j) {
      if (used[j]) continue;
      const double d = dist(pred[i], gt[j]);
      if (d > penalty) continue;
      used[j] = true;
      rec(i + 1, cost + d, matched + 1);
      used[j] = false;
    }
  };
  rec(0, 0.0, 0);
  return best;
}

/// All-point interpolated AP from a ranked list of hit flags.
inline double ap_from_hits(const std::vector<bool>& hits, int n_gt) {
  std::vector<double> prec;
  std::vector<double> rec;
  int tp = 0;
  for (std::size_t k = 0; k < hits.size(); ++k) {
    if (hits[k]) ++tp;
    prec.push_back(static_cast<double>(tp) / static_cast<double>(k + 1));
    rec.push_back(static_cast<double>(tp) / n_gt);
  }
  // sum over recall increments of the best precision at or after that rank
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t k = 0; k < hits.size(); ++k) {
    if (!hits[k]) continue;
    double p = 0.0;
    for (std::size_t j = k; j < prec.size(); ++j) p = std::max(p, prec[j]);
    ap += (rec[k] - prev_recall) * p;
    prev_recall = rec[k];
  }
  return ap;
}

/// Enumerates every (w0 x h0) cell of every scale, summing pixel losses
/// directly, and returns the winner-cell loss over the cell area.
inline double brute_force_wta(const ScoreGridSet& scores, const LabelGridSet& labels,
                              const ClassWeightTable& weights_bar, std::vector<CellCorner>* winners = nullptr) {
  const int w0 = labels.scales[0].width();
  const int h0 = labels.scales[0].height();
  double total = 0.0;
  if (winners) winners->clear();
  for (int s = 0; s < labels.n_scales(); ++s) {
    const auto& lab = labels.scales[s];
    const auto& sc = scores[s];
    double best = -1.0;
    CellCorner corner;
    for (int cy = 0; cy < lab.height(); cy += h0) {
      for (int cx = 0; cx < lab.width(); cx += w0) {
        double sum = 0.0;
        for (int y = cy; y < std::min(cy + h0, lab.height()); ++y) {
          for (int x = cx; x < std::min(cx + w0, lab.width()); ++x) {
            const int c = lab.at(x, y);
            sum += -weights_bar.at(s, c) * std::log(std::max(sc.at(c, x, y), 1e-12));
          }
        }
        if (sum > best) {
          best = sum;
          corner = {cx, cy};
        }
      }
    }
    total += best;
    if (winners) winners->push_back(corner);
  }
  return total / (static_cast<double>(w0) * h0);
}

/// Central finite difference of f at x[i].
inline double central_difference(const std::function<double()>& f, double& x, double h) {
  const double saved = x;
  x = saved + h;
  const double plus = f();
  x = saved - h;
  const double minus = f();
  x = saved;
  return (plus - minus) / (2.0 * h);
}

/// Relative error with an absolute floor so near-zero gradients compare sanely.
inline double relative_error(double analytic, double numeric, double floor = 1e-8) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

}  // namespace lsc::oracle
