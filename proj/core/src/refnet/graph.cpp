#include "lsc/refnet/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "lsc/random.hpp"

namespace lsc::nn {

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::Input: return "input";
    case OpKind::Conv: return "conv";
    case OpKind::ConvTranspose: return "conv_transpose";
    case OpKind::Relu: return "relu";
    case OpKind::MaxPool: return "max_pool";
    case OpKind::Concat: return "concat";
  }
  return "unknown";
}

void Gradients::zero() {
  for (auto& v : values) std::fill(v.begin(), v.end(), 0.0);
}

Gradients& Gradients::operator+=(const Gradients& other) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    for (std::size_t j = 0; j < values[i].size(); ++j) values[i][j] += other.values[i][j];
  }
  return *this;
}

Gradients& Gradients::operator*=(double k) {
  for (auto& v : values) {
    for (double& x : v) x *= k;
  }
  return *this;
}

int Graph::add_node(Node node) {
  for (int in : node.inputs) {
    if (in < 0 || in >= static_cast<int>(nodes_.size())) throw Error("graph input refers to an unknown node");
  }
  nodes_.push_back(std::move(node));
  return static_cast<int>(nodes_.size()) - 1;
}

int Graph::add_parameter(std::string name, std::vector<int> shape) {
  const auto n = std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                                 [](std::size_t a, int b) { return a * static_cast<std::size_t>(b); });
  params_.push_back(Parameter{std::move(name), std::move(shape), std::vector<double>(n, 0.0)});
  return static_cast<int>(params_.size()) - 1;
}

int Graph::add_input(int channels, std::string name) {
  if (channels <= 0) throw Error("input needs at least one channel");
  Node n;
  n.kind = OpKind::Input;
  n.name = std::move(name);
  n.channels = channels;
  return add_node(std::move(n));
}

int Graph::add_conv(int input, int out_channels, const std::string& name, int kernel) {
  if (out_channels <= 0) throw Error("layer '" + name + "' needs at least one output channel");
  const Node& in = nodes_.at(input);
  Node n;
  n.kind = OpKind::Conv;
  n.name = name;
  n.inputs = {input};
  n.channels = out_channels;
  n.geometry = ConvGeometry{kernel, 1, kernel / 2};
  n.pool_depth = in.pool_depth;
  n.weight = add_parameter(name + "/weight", {out_channels, in.channels, kernel, kernel});
  n.bias = add_parameter(name + "/bias", {out_channels});
  return add_node(std::move(n));
}

int Graph::add_conv_transpose(int input, int out_channels, int factor, const std::string& name) {
  if (factor < 2 || factor % 2 != 0) throw Error("upsampling factor must be an even integer >= 2");
  if (out_channels <= 0) throw Error("layer '" + name + "' needs at least one output channel");
  const Node& in = nodes_.at(input);
  Node n;
  n.kind = OpKind::ConvTranspose;
  n.name = name;
  n.inputs = {input};
  n.channels = out_channels;
  n.geometry = ConvGeometry{2 * factor, factor, factor / 2};
  n.pool_depth = in.pool_depth;
  n.weight = add_parameter(name + "/weight", {in.channels, out_channels, 2 * factor, 2 * factor});
  n.bias = add_parameter(name + "/bias", {out_channels});
  return add_node(std::move(n));
}

int Graph::add_relu(int input) {
  const Node& in = nodes_.at(input);
  Node n;
  n.kind = OpKind::Relu;
  n.name = in.name + "/relu";
  n.inputs = {input};
  n.channels = in.channels;
  n.pool_depth = in.pool_depth;
  return add_node(std::move(n));
}

int Graph::add_max_pool(int input) {
  const Node& in = nodes_.at(input);
  Node n;
  n.kind = OpKind::MaxPool;
  n.name = in.name + "/pool";
  n.inputs = {input};
  n.channels = in.channels;
  n.pool_depth = in.pool_depth + 1;
  return add_node(std::move(n));
}

int Graph::add_concat(std::vector<int> inputs, const std::string& name) {
  if (inputs.empty()) throw Error("concat '" + name + "' needs inputs");
  Node n;
  n.kind = OpKind::Concat;
  n.name = name;
  n.inputs = std::move(inputs);
  for (int in : n.inputs) {
    const Node& src = nodes_.at(in);
    n.channels += src.channels;
    n.pool_depth = std::max(n.pool_depth, src.pool_depth);
  }
  return add_node(std::move(n));
}

void Graph::initialize(std::uint64_t seed, double gain) {
  SplitMix64 rng(seed);
  for (const auto& node : nodes_) {
    if (node.weight < 0) continue;
    const Node& in = nodes_[node.inputs[0]];
    const int k = node.geometry.kernel;
    double fan_in = static_cast<double>(in.channels) * k * k;
    if (node.kind == OpKind::ConvTranspose) {
      // Each output pixel sees (kernel / stride)^2 taps per input channel.
      const int taps = k / node.geometry.stride;
      fan_in = static_cast<double>(in.channels) * taps * taps;
    }
    const double bound = 1.0 / std::sqrt(fan_in);
    for (double& v : params_[node.weight].value) v = (2.0 * rng.uniform() - 1.0) * gain * bound;
    for (double& v : params_[node.bias].value) v = (2.0 * rng.uniform() - 1.0) * bound;
  }
}

void Graph::copy_layer(int from, int to) {
  const Node& a = nodes_.at(from);
  const Node& b = nodes_.at(to);
  if (a.weight < 0 || b.weight < 0 || params_[a.weight].shape != params_[b.weight].shape) {
    throw Error("cannot copy between layers '" + a.name + "' and '" + b.name + "'");
  }
  params_[b.weight].value = params_[a.weight].value;
  params_[b.bias].value = params_[a.bias].value;
}

std::size_t Graph::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

Gradients Graph::make_gradients() const {
  Gradients g;
  g.values.reserve(params_.size());
  for (const auto& p : params_) g.values.emplace_back(p.value.size(), 0.0);
  return g;
}

Activations Graph::forward(const Tensor& input) const {
  if (nodes_.empty() || nodes_[0].kind != OpKind::Input) throw Error("graph has no input node");
  if (input.channels() != nodes_[0].channels) {
    throw Error("input has " + std::to_string(input.channels()) + " channels, graph expects " +
                std::to_string(nodes_[0].channels));
  }
  Activations acts;
  acts.values.resize(nodes_.size());
  acts.cols.resize(nodes_.size());
  acts.argmax.resize(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    switch (n.kind) {
      case OpKind::Input:
        acts.values[i] = input;
        break;
      case OpKind::Conv:
        acts.values[i] = conv2d_forward(acts.values[n.inputs[0]], params_[n.weight].value,
                                        params_[n.bias].value, n.channels, n.geometry, acts.cols[i]);
        break;
      case OpKind::ConvTranspose:
        acts.values[i] = conv_transpose2d_forward(acts.values[n.inputs[0]], params_[n.weight].value,
                                                  params_[n.bias].value, n.channels, n.geometry);
        break;
      case OpKind::Relu:
        acts.values[i] = relu_forward(acts.values[n.inputs[0]]);
        break;
      case OpKind::MaxPool:
        acts.values[i] = max_pool2x2_forward(acts.values[n.inputs[0]], acts.argmax[i]);
        break;
      case OpKind::Concat: {
        std::vector<const Tensor*> parts;
        for (int in : n.inputs) parts.push_back(&acts.values[in]);
        acts.values[i] = concat_channels(parts);
        break;
      }
    }
  }
  return acts;
}

void Graph::backward(const Activations& acts, std::span<const OutputGradient> outputs, Gradients& grads) const {
  if (acts.values.size() != nodes_.size()) throw Error("backward called without a matching forward pass");
  if (grads.values.size() != params_.size()) throw Error("gradient buffers do not match the graph");
  std::vector<Tensor> dv(nodes_.size());
  const auto accumulate = [&](int id, const Tensor& g) {
    if (dv[id].empty()) {
      dv[id] = g;
    } else {
      for (std::size_t k = 0; k < g.values().size(); ++k) dv[id].data()[k] += g.data()[k];
    }
  };
  for (const auto& o : outputs) {
    if (o.grad->shape() != acts.values.at(o.node).shape()) throw Error("output gradient shape mismatch");
    accumulate(o.node, *o.grad);
  }

  for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
    if (dv[i].empty()) continue;
    const Node& n = nodes_[i];
    const Tensor& g = dv[i];
    switch (n.kind) {
      case OpKind::Input:
        break;
      case OpKind::Conv: {
        const int in = n.inputs[0];
        const bool needs_input = nodes_[in].kind != OpKind::Input;
        Tensor gin;
        conv2d_backward(acts.values[in], params_[n.weight].value, g, n.geometry, acts.cols[i],
                        needs_input ? &gin : nullptr, grads.values[n.weight], grads.values[n.bias]);
        if (needs_input) accumulate(in, gin);
        break;
      }
      case OpKind::ConvTranspose: {
        const int in = n.inputs[0];
        Tensor gin;
        conv_transpose2d_backward(acts.values[in], params_[n.weight].value, g, n.geometry, &gin,
                                  grads.values[n.weight], grads.values[n.bias]);
        accumulate(in, gin);
        break;
      }
      case OpKind::Relu: {
        Tensor gin(g.shape());
        relu_backward(acts.values[i], g, gin);
        accumulate(n.inputs[0], gin);
        break;
      }
      case OpKind::MaxPool: {
        Tensor gin(acts.values[n.inputs[0]].shape(), 0.0);
        max_pool2x2_backward(g, acts.argmax[i], gin);
        accumulate(n.inputs[0], gin);
        break;
      }
      case OpKind::Concat: {
        const double* src = g.data();
        for (int in : n.inputs) {
          Tensor part(acts.values[in].shape());
          std::copy(src, src + part.values().size(), part.data());
          src += part.values().size();
          accumulate(in, part);
        }
        break;
      }
    }
    dv[i] = Tensor();  // release early
  }
}

}  // namespace lsc::nn
