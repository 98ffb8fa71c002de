#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "lsc/grids.hpp"
#include "lsc/gwta_loss.hpp"
#include "lsc/refnet/network.hpp"

namespace lsc::nn {

struct TrainSample {
  Tensor image;         // padded to the label frame
  LabelGridSet labels;
};

/// Builds a training sample, padding the raw image into the label frame.
TrainSample make_sample(const Tensor& image, LabelGridSet labels);

enum class LossMode { WinnerTakeAll, Combined };

struct LossWeights {
  ClassWeightTable alpha;      // plain class weights (combined loss)
  ClassWeightTable alpha_bar;  // rescaled weights (winner-cell loss)
};

struct TraceRow {
  std::int64_t step = 0;       // 1-based step index
  double l_wta = 0.0;          // batch mean
  double l_comb = 0.0;         // batch mean, under alpha
  std::vector<CellCorner> winners;  // of the first sample in the batch
};

/// Classic momentum: v <- mu v - lr g, theta <- theta + v.
class SgdMomentum {
public:
  SgdMomentum(double learning_rate, double momentum) : lr_(learning_rate), mu_(momentum) {}

  void step(std::vector<Parameter>& params, const Gradients& grads);

  std::vector<std::vector<double>>& velocity() { return velocity_; }
  const std::vector<std::vector<double>>& velocity() const { return velocity_; }

private:
  double lr_;
  double mu_;
  std::vector<std::vector<double>> velocity_;
};

/// Mini-batch trainer. The batch for step t is a pure function of
/// (seed, t, dataset size), so resumed runs replay the same order.
class Trainer {
public:
  Trainer(RefNet& net, const std::vector<TrainSample>& data, LossWeights weights,
          LossMode mode = LossMode::WinnerTakeAll);

  /// One optimisation step; returns its trace row.
  TraceRow step();
  /// Runs `steps` more steps, calling `on_step` after each (may be empty).
  std::vector<TraceRow> run(std::int64_t steps, const std::function<void(const TraceRow&)>& on_step = {});

  std::int64_t steps_done() const { return step_; }
  void set_steps_done(std::int64_t step) { step_ = step; }
  SgdMomentum& optimizer() { return opt_; }

  /// Sample indices used by step `t` (0-based).
  std::vector<std::size_t> batch_indices(std::int64_t t) const;

private:
  RefNet& net_;
  const std::vector<TrainSample>& data_;
  LossWeights weights_;
  LossMode mode_;
  SgdMomentum opt_;
  std::int64_t step_ = 0;
};

}  // namespace lsc::nn
