#pragma once

// Toy overfit gate: a small detector must memorise ten synthetic crowd images.

#include <chrono>
#include <cstdint>
#include <vector>

#include "lsc/fusion.hpp"
#include "lsc/metrics.hpp"
#include "lsc/pseudo_gt.hpp"
#include "lsc/refnet/trainer.hpp"
#include "lsc/synthetic.hpp"

namespace lsc::gate {

inline constexpr std::size_t kMaxParameters = 200000;
inline constexpr std::int64_t kMaxSteps = 2000;
inline constexpr double kMaxMae = 1.0;
inline constexpr double kMaxMle = 4.0;
inline constexpr double kMaxSeconds = 15.0 * 60.0;
inline constexpr int kImages = 10;
inline constexpr int kSide = 224;
inline constexpr std::uint64_t kSceneSeed = 42;
inline constexpr std::int64_t kEvalEvery = 100;

inline synth::SceneOptions scene_options() {
  synth::SceneOptions o;
  o.width = kSide;
  o.height = kSide;
  o.min_clusters = 3;
  o.max_clusters = 5;
  o.min_spacing = 1.5;
  o.max_spacing = 26.0;
  o.max_cluster_rows = 4;
  o.isolated_heads = 2;
  return o;
}

inline nn::NetConfig net_config() {
  nn::NetConfig c;
  c.base_channels = 2;
  c.init_gain = 2.449489742783178;  // sqrt(6): variance-preserving for ReLU
  c.learning_rate = 1e-3;
  c.momentum = 0.9;
  c.batch_size = 4;
  c.seed = 1;
  return c;
}

struct GateResult {
  std::size_t parameters = 0;
  std::int64_t steps = 0;
  double mae = 0.0;
  double mle = 0.0;
  double seconds = 0.0;
};

/// Trains up to kMaxSteps, checking the training set every kEvalEvery steps
/// and stopping once both targets hold. Reports the last evaluation.
inline GateResult run_overfit_gate() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto catalog = BoxCatalog::build(4, 3, {4, 2, 1, 1});
  const auto scenes = synth::make_dataset(kImages, kSceneSeed, scene_options(), catalog);
  std::vector<LabelGridSet> grids;
  std::vector<nn::TrainSample> data;
  for (const auto& s : scenes) {
    grids.push_back(generate_pseudo_gt(s.annotations, catalog));
    data.push_back(nn::make_sample(s.image, grids.back()));
  }
  const auto counts = count_classes(grids, catalog);
  auto net = nn::RefNet::build(net_config());
  nn::Trainer trainer(net, data, {class_weights(counts), gwta_class_weights(counts)});

  GateResult r;
  r.parameters = net.parameter_count();
  while (trainer.steps_done() < kMaxSteps) {
    trainer.step();
    if (trainer.steps_done() % kEvalEvery != 0) continue;
    std::vector<EvalRecord> recs;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto pass = net.forward(data[i].image, grids[i].frame);
      const auto fused = fuse_and_count(pass.scores, catalog, grids[i].frame, NmsConfig{});
      recs.push_back(make_record(fused.detections, scenes[i].annotations));
    }
    r.steps = trainer.steps_done();
    r.mae = mae(recs);
    r.mle = mle(recs);
    if (r.mae <= kMaxMae && r.mle <= kMaxMle) break;
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace lsc::gate
