#include "lsc/gwta_loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace lsc {
namespace {

void check_shapes(const ScoreGridSet& scores, const LabelGridSet& labels, const ClassWeightTable& w) {
  if (scores.size() != labels.scales.size()) {
    throw Error("score grids have " + std::to_string(scores.size()) + " scales, labels have " +
                std::to_string(labels.scales.size()));
  }
  if (static_cast<int>(scores.size()) > w.n_scales()) throw Error("weight table has too few scales");
  for (std::size_t s = 0; s < scores.size(); ++s) {
    if (scores[s].width() != labels.scales[s].width() || scores[s].height() != labels.scales[s].height()) {
      throw Error("score and label grids differ in shape at scale " + std::to_string(s));
    }
    if (scores[s].channels() != w.n_boxes() + 1) throw Error("channel count does not match weights");
  }
}

double cell_loss(const ScoreGrid& scores, int x, int y, int label, std::span<const double> weights) {
  const double p = std::max(scores.at(label, x, y), kLogFloor);
  return -weights[label] * std::log(p);
}

}  // namespace

double pixel_loss(std::span<const double> probs, int label, std::span<const double> weights) {
  if (label < 0 || static_cast<std::size_t>(label) >= probs.size() || weights.size() != probs.size()) {
    throw Error("pixel_loss: label or weight count does not match the class count");
  }
  return -weights[label] * std::log(std::max(probs[label], kLogFloor));
}

double branch_loss(const ScoreGrid& scores, const LabelGrid& labels, std::span<const double> weights) {
  if (scores.width() != labels.width() || scores.height() != labels.height()) {
    throw Error("branch_loss: score and label grids differ in shape");
  }
  if (static_cast<std::size_t>(scores.channels()) != weights.size()) {
    throw Error("branch_loss: weight count does not match channels");
  }
  if (labels.size() == 0) return 0.0;
  double sum = 0.0;
  for (int y = 0; y < labels.height(); ++y) {
    for (int x = 0; x < labels.width(); ++x) sum += cell_loss(scores, x, y, labels.at(x, y), weights);
  }
  return sum / static_cast<double>(labels.size());
}

double combined_loss(const ScoreGridSet& scores, const LabelGridSet& labels,
                     const ClassWeightTable& weights) {
  check_shapes(scores, labels, weights);
  double total = 0.0;
  for (std::size_t s = 0; s < scores.size(); ++s) {
    total += branch_loss(scores[s], labels.scales[s], weights.scale(static_cast<int>(s)));
  }
  return total;
}

CellLossGrid gwta_cell_losses(const ScoreGridSet& scores, const LabelGridSet& labels,
                              const ClassWeightTable& weights_bar) {
  check_shapes(scores, labels, weights_bar);
  CellLossGrid out;
  if (scores.empty()) return out;
  out.cell_width = scores[0].width();
  out.cell_height = scores[0].height();
  for (std::size_t s = 0; s < scores.size(); ++s) {
    const auto& g = scores[s];
    const auto w = weights_bar.scale(static_cast<int>(s));
    const int nx = (g.width() + out.cell_width - 1) / out.cell_width;
    const int ny = (g.height() + out.cell_height - 1) / out.cell_height;
    Grid<double> cells(nx, ny, 0.0);
    for (int y = 0; y < g.height(); ++y) {
      for (int x = 0; x < g.width(); ++x) {
        cells.at(x / out.cell_width, y / out.cell_height) += cell_loss(g, x, y, labels.scales[s].at(x, y), w);
      }
    }
    out.scales.push_back(std::move(cells));
  }
  return out;
}

CellCorner gwta_winner(const Grid<double>& cell_losses, int cell_width, int cell_height) {
  if (cell_losses.size() == 0) throw Error("gwta_winner: empty cell grid");
  int best_x = 0;
  int best_y = 0;
  double best = cell_losses.at(0, 0);
  for (int y = 0; y < cell_losses.height(); ++y) {
    for (int x = 0; x < cell_losses.width(); ++x) {
      if (cell_losses.at(x, y) > best) {
        best = cell_losses.at(x, y);
        best_x = x;
        best_y = y;
      }
    }
  }
  return {best_x * cell_width, best_y * cell_height};
}

LossReport gwta_loss(const ScoreGridSet& scores, const LabelGridSet& labels,
                     const ClassWeightTable& weights_bar, const ClassWeightTable* weights_comb) {
  const auto cells = gwta_cell_losses(scores, labels, weights_bar);
  LossReport report;
  report.l_comb = combined_loss(scores, labels, weights_comb ? *weights_comb : weights_bar);
  if (scores.empty()) return report;
  const double area = static_cast<double>(cells.cell_width) * cells.cell_height;
  double sum = 0.0;
  for (const auto& grid : cells.scales) {
    const auto corner = gwta_winner(grid, cells.cell_width, cells.cell_height);
    sum += grid.at(corner.x / cells.cell_width, corner.y / cells.cell_height);
    report.winners.push_back(corner);
  }
  report.l_wta = sum / area;
  return report;
}

namespace {

// Adds weight * (p - onehot) * scale for every cell of [x0,x1) x [y0,y1).
void add_softmax_gradient(const ScoreGrid& probs, const LabelGrid& labels, std::span<const double> w,
                          double scale, int x0, int y0, int x1, int y1, ScoreGrid& grad) {
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      const int label = labels.at(x, y);
      // The clamp makes the loss flat in the logits where it is active.
      if (probs.at(label, x, y) < kLogFloor) continue;
      const double k = w[label] * scale;
      for (int c = 0; c < probs.channels(); ++c) {
        grad.at(c, x, y) += k * (probs.at(c, x, y) - (c == label ? 1.0 : 0.0));
      }
    }
  }
}

}  // namespace

ScoreGridSet gwta_logit_gradient(const ScoreGridSet& scores, const LabelGridSet& labels,
                                 const ClassWeightTable& weights_bar) {
  const auto report = gwta_loss(scores, labels, weights_bar);
  ScoreGridSet grads;
  if (scores.empty()) return grads;
  const int cw = scores[0].width();
  const int ch = scores[0].height();
  const double scale = 1.0 / (static_cast<double>(cw) * ch);
  for (std::size_t s = 0; s < scores.size(); ++s) {
    const auto& g = scores[s];
    ScoreGrid grad(g.channels(), g.width(), g.height(), 0.0);
    const auto corner = report.winners[s];
    add_softmax_gradient(g, labels.scales[s], weights_bar.scale(static_cast<int>(s)), scale, corner.x,
                         corner.y, std::min(corner.x + cw, g.width()), std::min(corner.y + ch, g.height()),
                         grad);
    grads.push_back(std::move(grad));
  }
  return grads;
}

ScoreGridSet combined_logit_gradient(const ScoreGridSet& scores, const LabelGridSet& labels,
                                     const ClassWeightTable& weights) {
  check_shapes(scores, labels, weights);
  ScoreGridSet grads;
  for (std::size_t s = 0; s < scores.size(); ++s) {
    const auto& g = scores[s];
    ScoreGrid grad(g.channels(), g.width(), g.height(), 0.0);
    if (g.plane() > 0) {
      add_softmax_gradient(g, labels.scales[s], weights.scale(static_cast<int>(s)),
                           1.0 / static_cast<double>(g.plane()), 0, 0, g.width(), g.height(), grad);
    }
    grads.push_back(std::move(grad));
  }
  return grads;
}

}  // namespace lsc
