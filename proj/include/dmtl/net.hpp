#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "dmtl/numerics.hpp"
#include "dmtl/task_weights.hpp"

namespace dmtl {

enum class Activation { kRelu, kIdentity };

struct LayerSpec {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  Activation activation = Activation::kIdentity;
};

/// y = act(x W^T + b) with W stored out_dim x in_dim.
struct Layer {
  LayerSpec spec;
  Matrix weight;
  Vector bias;
};

/// Shape of a hard-parameter-sharing network: a ReLU trunk producing Z and
/// up to two branches, each a linear bottleneck embedding followed by a
/// logit layer.
struct Topology {
  std::size_t input_dim = 16;
  std::vector<std::size_t> trunk_widths = {32, 16};
  std::size_t bottleneck1 = 8;
  std::size_t bottleneck2 = 8;
  std::size_t classes1 = 2;
  std::size_t classes2 = 2;
  bool has_branch1 = true;
  bool has_branch2 = true;

  std::size_t trunk_dim() const {
    return trunk_widths.empty() ? input_dim : trunk_widths.back();
  }
  void validate() const;
};

/// Theta = {shared, branch1, branch2}. An absent branch has no layers.
struct NetworkParams {
  std::vector<Layer> shared;
  std::vector<Layer> branch1;
  std::vector<Layer> branch2;

  bool has_branch1() const { return !branch1.empty(); }
  bool has_branch2() const { return !branch2.empty(); }
  std::size_t input_dim() const;
  std::size_t trunk_dim() const;
};

// Gradients share the parameter layout.
using Gradients = NetworkParams;

// Xavier-uniform weights, zero biases. Trunk and each branch draw from their
// own stream of `rng`, so dropping a branch leaves the others unchanged.
NetworkParams init_network(const Topology& topology, const Rng& rng);

// Same layout, all zeros.
NetworkParams zeros_like(const NetworkParams& params);

struct LayerCache {
  Matrix input;
  Matrix pre;
  Matrix out;
  Matrix dropout_mask;  // empty when no dropout was applied
};

struct ForwardTrace {
  std::vector<LayerCache> shared;
  std::vector<LayerCache> branch1;
  std::vector<LayerCache> branch2;

  std::size_t batch_size() const;
  const Matrix& z() const;
  const Matrix& x1() const { return branch1.front().out; }
  const Matrix& x2() const { return branch2.front().out; }
  const Matrix& logits1() const { return branch1.back().out; }
  const Matrix& logits2() const { return branch2.back().out; }
};

ForwardTrace forward(const NetworkParams& params, const Matrix& batch);

// Inverted dropout on the outputs of the trunk's hidden ReLU layers; rate 0
// is identical to forward().
ForwardTrace forward_train(const NetworkParams& params, const Matrix& batch, double dropout,
                           Rng& rng);

// Gradient of w_1 L_1 + w_2 L_2 with respect to every parameter. The head
// gradients are unweighted; each branch's upstream gradient is scaled by its
// task weight before it reaches the trunk. grad_x1 is added at the branch-1
// bottleneck output. Gradients for an absent branch are ignored.
Gradients backward(const NetworkParams& params, const ForwardTrace& trace,
                   const Matrix& grad_logits1, const Matrix& grad_logits2, const Matrix& grad_x1,
                   const TaskWeights& w);

struct NamedTensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> data;
};

// "shared.0.weight", "branch1.1.bias", ...
std::vector<NamedTensor> named_tensors(const NetworkParams& params);

Vector flatten(const NetworkParams& params);
void unflatten(NetworkParams& params, std::span<const double> values);

}  // namespace dmtl
