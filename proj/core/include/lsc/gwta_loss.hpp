#pragma once

#include <span>
#include <vector>

#include "lsc/grids.hpp"

namespace lsc {

/// Probabilities are clamped to this floor before the log.
inline constexpr double kLogFloor = 1e-12;

/// Weighted cross entropy of one cell: -weights[label] * log(probs[label]).
double pixel_loss(std::span<const double> probs, int label, std::span<const double> weights);

/// Mean pixel loss over every cell of one scale.
double branch_loss(const ScoreGrid& scores, const LabelGrid& labels, std::span<const double> weights);

/// Sum of branch losses over all scales, weighted by alpha.
double combined_loss(const ScoreGridSet& scores, const LabelGridSet& labels,
                     const ClassWeightTable& weights);

/// Top-left corner of a winner-grid cell, in pixels of its own scale map.
struct CellCorner {
  int x = 0;
  int y = 0;

  friend bool operator==(const CellCorner&, const CellCorner&) = default;
};

/// Per-scale sums of pixel losses over fixed cells of the coarsest map's
/// size. Each scale s holds 2^s x 2^s cells (fewer pixels at ragged borders).
struct CellLossGrid {
  int cell_width = 0;
  int cell_height = 0;
  std::vector<Grid<double>> scales;
};

CellLossGrid gwta_cell_losses(const ScoreGridSet& scores, const LabelGridSet& labels,
                              const ClassWeightTable& weights_bar);

/// Arg-max cell of one scale; ties go to the smallest y, then smallest x.
CellCorner gwta_winner(const Grid<double>& cell_losses, int cell_width, int cell_height);

struct LossReport {
  double l_comb = 0.0;
  double l_wta = 0.0;
  std::vector<CellCorner> winners;  // per scale
};

/// Winner-cell loss: sum over scales of the winner cell's loss divided by
/// the cell area. l_comb is evaluated with `weights_comb` (the plain alpha
/// table) when given, otherwise with `weights_bar`.
LossReport gwta_loss(const ScoreGridSet& scores, const LabelGridSet& labels,
                     const ClassWeightTable& weights_bar,
                     const ClassWeightTable* weights_comb = nullptr);

/// d l_wta / d logits for every scale. Non-zero only inside winner cells,
/// where it is weights_bar[label] * (softmax - onehot) / (cell area).
/// Winner selection is held constant.
ScoreGridSet gwta_logit_gradient(const ScoreGridSet& scores, const LabelGridSet& labels,
                                 const ClassWeightTable& weights_bar);

/// d l_comb / d logits, used by the loss ablation without winner cells.
ScoreGridSet combined_logit_gradient(const ScoreGridSet& scores, const LabelGridSet& labels,
                                     const ClassWeightTable& weights);

}  // namespace lsc
