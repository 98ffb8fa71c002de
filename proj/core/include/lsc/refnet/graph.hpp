#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lsc/refnet/ops.hpp"
#include "lsc/refnet/tensor.hpp"

namespace lsc::nn {

enum class OpKind { Input, Conv, ConvTranspose, Relu, MaxPool, Concat };

const char* op_name(OpKind kind);

/// Trainable tensor addressed by a layer path such as "extractor/block2/conv0/weight".
struct Parameter {
  std::string name;
  std::vector<int> shape;
  std::vector<double> value;
};

struct Node {
  OpKind kind = OpKind::Input;
  std::string name;
  std::vector<int> inputs;
  int channels = 0;
  int weight = -1;  // parameter indices
  int bias = -1;
  ConvGeometry geometry;
  int pool_depth = 0;  // max-pool stages between the graph input and this node
};

/// Gradient buffers parallel to Graph::parameters().
struct Gradients {
  std::vector<std::vector<double>> values;

  void zero();
  Gradients& operator+=(const Gradients& other);
  Gradients& operator*=(double k);
};

/// Per-call activations and backward caches. Produced by Graph::forward,
/// consumed by Graph::backward; a forward pass never mutates the graph.
struct Activations {
  std::vector<Tensor> values;
  std::vector<std::vector<double>> cols;         // conv patch matrices
  std::vector<std::vector<std::size_t>> argmax;  // pool routing

  bool empty() const { return values.empty(); }
};

/// Feed-forward layer graph in construction (= topological) order.
class Graph {
public:
  int add_input(int channels, std::string name = "input");
  int add_conv(int input, int out_channels, const std::string& name, int kernel = 3);
  /// Upsamples by `factor` with kernel 2*factor, stride factor, padding factor/2.
  int add_conv_transpose(int input, int out_channels, int factor, const std::string& name);
  int add_relu(int input);
  int add_max_pool(int input);
  int add_concat(std::vector<int> inputs, const std::string& name);

  /// Seeded uniform init: biases in [-k, k], weights in [-gain k, gain k], k = 1/sqrt(fan_in).
  void initialize(std::uint64_t seed, double gain = 1.0);
  /// Copies weight and bias of a layer into another layer of equal shape.
  void copy_layer(int from, int to);

  const std::vector<Node>& nodes() const { return nodes_; }
  const Node& node(int id) const { return nodes_.at(id); }
  std::vector<Parameter>& parameters() { return params_; }
  const std::vector<Parameter>& parameters() const { return params_; }
  std::size_t parameter_count() const;
  Gradients make_gradients() const;

  /// Evaluates every node; input must have the declared channel count.
  Activations forward(const Tensor& input) const;

  /// Reverse accumulation from the given output gradients into `grads`.
  struct OutputGradient {
    int node;
    const Tensor* grad;
  };
  void backward(const Activations& acts, std::span<const OutputGradient> outputs, Gradients& grads) const;

private:
  int add_node(Node node);
  int add_parameter(std::string name, std::vector<int> shape);

  std::vector<Node> nodes_;
  std::vector<Parameter> params_;
};

}  // namespace lsc::nn
