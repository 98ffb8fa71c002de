#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lsc/grids.hpp"
#include "lsc/gwta_loss.hpp"
#include "lsc/refnet/graph.hpp"

namespace lsc::nn {

inline constexpr int kExtractorBlocks = 5;

struct NetConfig {
  int in_channels = 3;
  int base_channels = 8;   // block k has base_channels * 2^k filters
  int convs_per_block = 1;
  int n_scales = 4;
  int n_boxes = 3;
  std::uint64_t seed = 1;
  double init_gain = 1.0;  // weights uniform in +-gain / sqrt(fan_in)
  double learning_rate = 1e-3;
  double momentum = 0.9;
  int batch_size = 4;

  void validate() const;
  friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

/// Feature taps of the extractor, index = scale s (0 = 1/16 resolution).
struct ExtractorTaps {
  int input = -1;
  std::vector<int> taps;
  /// (trunk layer, duplicate layer) pairs that start from equal weights.
  std::vector<std::pair<int, int>> replicas;
};

/// Five 3x3 conv blocks separated by 2x2 max pools. At each branch point the
/// next block is duplicated and the duplicate's output becomes a tap; the
/// last block feeds the 1/16 tap directly.
ExtractorTaps build_extractor(Graph& graph, const NetConfig& config);

struct TfmTerminals {
  int features = -1;  // terminal 2: top-down features for finer scales
  int logits = -1;    // terminal 4: 1 + n_boxes channels, before softmax
  int concat = -1;
};

/// Top-down feature modulator for scale s. `top_down` holds the terminal-2
/// outputs of TFM(0)..TFM(s-1); its size must equal s.
TfmTerminals build_tfm(Graph& graph, int scale, int tap, std::span<const int> top_down, int n_boxes);

/// Result of one forward pass; keep it alive for backward.
struct ForwardPass {
  ImageFrame frame;
  Activations activations;
  ScoreGridSet logits;
  ScoreGridSet scores;
};

/// Toy-width multi-branch detector: extractor + one TFM per scale.
class RefNet {
public:
  static RefNet build(const NetConfig& config);

  const NetConfig& config() const { return config_; }
  Graph& graph() { return graph_; }
  const Graph& graph() const { return graph_; }
  const ExtractorTaps& extractor() const { return extractor_; }
  const std::vector<TfmTerminals>& tfms() const { return tfms_; }
  std::size_t parameter_count() const { return graph_.parameter_count(); }

  /// `image` must already be padded to a multiple of 16; the frame locates it.
  ForwardPass forward(const Tensor& padded_image, const ImageFrame& frame) const;
  /// Pads `image` into its own frame then runs forward.
  ForwardPass forward_image(const Tensor& image) const;

  /// Parameter gradients for given logit gradients (one grid per scale).
  Gradients backward(const ForwardPass& pass, const ScoreGridSet& logit_grads) const;

  /// Parameter gradients of the winner-cell loss; also returns the report.
  Gradients backward(const ForwardPass& pass, const LabelGridSet& labels, const ClassWeightTable& weights_bar,
                     LossReport* report = nullptr) const;

private:
  NetConfig config_;
  Graph graph_;
  ExtractorTaps extractor_;
  std::vector<TfmTerminals> tfms_;
};

}  // namespace lsc::nn
