#include "lsc/refnet/network.hpp"

#include <cstring>

#include "lsc/box_catalog.hpp"

namespace lsc::nn {
namespace {

struct Block {
  int first = -1;  // first conv layer
  int output = -1;
  std::vector<int> convs;
};

Block add_block(Graph& g, int input, int width, int convs, const std::string& name) {
  Block b;
  int x = input;
  for (int i = 0; i < convs; ++i) {
    const int conv = g.add_conv(x, width, name + "/conv" + std::to_string(i));
    b.convs.push_back(conv);
    x = g.add_relu(conv);
  }
  b.first = b.convs.front();
  b.output = x;
  return b;
}

ScoreGrid to_score_grid(const Tensor& t) {
  ScoreGrid g(t.channels(), t.width(), t.height());
  std::memcpy(g.values().data(), t.data(), t.values().size() * sizeof(double));
  return g;
}

Tensor to_tensor(const ScoreGrid& g) {
  Tensor t(Shape{g.channels(), g.height(), g.width()});
  std::memcpy(t.data(), g.values().data(), g.values().size() * sizeof(double));
  return t;
}

}  // namespace

void NetConfig::validate() const {
  if (in_channels < 1) throw Error("in_channels must be >= 1");
  if (base_channels < 1) throw Error("base_channels must be >= 1");
  if (convs_per_block < 1) throw Error("convs_per_block must be >= 1");
  if (n_scales < 1 || n_scales > kMaxScales) {
    throw Error("n_scales must be in [1, " + std::to_string(kMaxScales) + "]: the extractor has " +
                std::to_string(kMaxScales) + " taps");
  }
  if (n_boxes < 1) throw Error("n_boxes must be >= 1");
  if (batch_size < 1) throw Error("batch_size must be >= 1");
  if (!(init_gain > 0.0)) throw Error("init_gain must be positive");
  if (learning_rate < 0.0) throw Error("learning_rate must be non-negative");
  if (momentum < 0.0 || momentum >= 1.0) throw Error("momentum must be in [0, 1)");
}

ExtractorTaps build_extractor(Graph& graph, const NetConfig& config) {
  config.validate();
  ExtractorTaps out;
  out.taps.assign(config.n_scales, -1);
  out.input = graph.add_input(config.in_channels);

  // Block k runs at 1/2^k resolution. The tap for stride 2^k (k = 1..3) is a
  // duplicate of block k fed by the same pooled input as the trunk block.
  int x = out.input;
  for (int k = 0; k < kExtractorBlocks; ++k) {
    const int width = config.base_channels << k;
    const std::string name = "extractor/block" + std::to_string(k + 1);
    const Block trunk = add_block(graph, x, width, config.convs_per_block, name);
    if (k == kExtractorBlocks - 1) {
      out.taps[0] = trunk.output;
      break;
    }
    if (k >= 1) {
      const int scale = kMaxScales - k;  // k=1 -> s=3 (1/2), k=3 -> s=1 (1/8)
      if (scale < config.n_scales) {
        const Block copy = add_block(graph, x, width, config.convs_per_block, name + "_branch");
        for (std::size_t i = 0; i < trunk.convs.size(); ++i) out.replicas.emplace_back(trunk.convs[i], copy.convs[i]);
        out.taps[scale] = copy.output;
      }
    }
    x = graph.add_max_pool(trunk.output);
  }
  return out;
}

TfmTerminals build_tfm(Graph& graph, int scale, int tap, std::span<const int> top_down, int n_boxes) {
  if (scale < 0 || scale >= kMaxScales) throw Error("TFM scale out of range");
  if (static_cast<int>(top_down.size()) != scale) {
    throw Error("TFM(" + std::to_string(scale) + ") needs " + std::to_string(scale) +
                " top-down inputs, got " + std::to_string(top_down.size()));
  }
  const std::string name = "tfm" + std::to_string(scale);
  const int f = graph.node(tap).channels;
  const int m = std::max(1, f / 2);

  TfmTerminals t;
  const int local = graph.add_conv(tap, m, name + "/local");
  t.features = graph.add_relu(local);

  std::vector<int> parts{t.features};
  for (std::size_t i = 0; i < top_down.size(); ++i) {
    const int factor = 1 << (scale - static_cast<int>(i));
    const std::string td = name + "/topdown" + std::to_string(i);
    const int up = graph.add_relu(graph.add_conv_transpose(top_down[i], m, factor, td + "/upsample"));
    parts.push_back(graph.add_relu(graph.add_conv(up, m, td + "/conv")));
  }
  t.concat = graph.add_concat(parts, name + "/concat");

  const int a = graph.add_relu(graph.add_conv(t.concat, 2 * m, name + "/tail0"));
  const int b = graph.add_relu(graph.add_conv(a, m, name + "/tail1"));
  t.logits = graph.add_conv(b, n_boxes + 1, name + "/tail2");
  return t;
}

RefNet RefNet::build(const NetConfig& config) {
  RefNet net;
  net.config_ = config;
  net.extractor_ = build_extractor(net.graph_, config);
  std::vector<int> top_down;
  for (int s = 0; s < config.n_scales; ++s) {
    net.tfms_.push_back(build_tfm(net.graph_, s, net.extractor_.taps[s], top_down, config.n_boxes));
    top_down.push_back(net.tfms_.back().features);
  }
  net.graph_.initialize(config.seed, config.init_gain);
  for (const auto& [trunk, copy] : net.extractor_.replicas) net.graph_.copy_layer(trunk, copy);
  return net;
}

ForwardPass RefNet::forward(const Tensor& padded_image, const ImageFrame& frame) const {
  if (padded_image.width() != frame.padded_width || padded_image.height() != frame.padded_height) {
    throw Error("input does not match its padded frame");
  }
  if (frame.padded_width % kCoarsestStride != 0 || frame.padded_height % kCoarsestStride != 0) {
    throw Error("input must be padded to a multiple of 16");
  }
  ForwardPass pass;
  pass.frame = frame;
  pass.activations = graph_.forward(padded_image);
  for (int s = 0; s < config_.n_scales; ++s) {
    const Tensor& logits = pass.activations.values[tfms_[s].logits];
    const auto expected = grid_shape(frame.padded_width, frame.padded_height, s);
    if (logits.width() != expected.width || logits.height() != expected.height) {
      throw Error("scale " + std::to_string(s) + " output does not match the label grid shape");
    }
    pass.logits.push_back(to_score_grid(logits));
    ScoreGrid probs = pass.logits.back();
    softmax_channels(probs);
    pass.scores.push_back(std::move(probs));
  }
  return pass;
}

ForwardPass RefNet::forward_image(const Tensor& image) const {
  const auto frame = ImageFrame::padded_to(image.width(), image.height(), kCoarsestStride);
  return forward(pad_to_frame(image, frame), frame);
}

Gradients RefNet::backward(const ForwardPass& pass, const ScoreGridSet& logit_grads) const {
  if (pass.activations.empty()) throw Error("backward called before forward");
  if (static_cast<int>(logit_grads.size()) != config_.n_scales) throw Error("need one logit gradient per scale");
  std::vector<Tensor> grads;
  grads.reserve(logit_grads.size());
  for (const auto& g : logit_grads) grads.push_back(to_tensor(g));
  std::vector<Graph::OutputGradient> outputs;
  for (int s = 0; s < config_.n_scales; ++s) outputs.push_back({tfms_[s].logits, &grads[s]});
  Gradients out = graph_.make_gradients();
  graph_.backward(pass.activations, outputs, out);
  return out;
}

Gradients RefNet::backward(const ForwardPass& pass, const LabelGridSet& labels,
                           const ClassWeightTable& weights_bar, LossReport* report) const {
  if (pass.activations.empty()) throw Error("backward called before forward");
  if (report) *report = gwta_loss(pass.scores, labels, weights_bar);
  return backward(pass, gwta_logit_gradient(pass.scores, labels, weights_bar));
}

}  // namespace lsc::nn
