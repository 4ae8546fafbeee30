#include "dmtl/net.hpp"

#include <cmath>
#include <string>

#include "dmtl/error.hpp"

namespace dmtl {

namespace {

Layer make_layer(std::size_t in, std::size_t out, Activation act, Rng& rng) {
  Layer layer{{in, out, act}, Matrix(out, in), Vector(out, 0.0)};
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  for (double& v : layer.weight.data()) v = rng.uniform(-limit, limit);
  return layer;
}

std::vector<Layer> make_branch(std::size_t dz, std::size_t bottleneck, std::size_t classes,
                               Rng rng) {
  std::vector<Layer> layers;
  layers.push_back(make_layer(dz, bottleneck, Activation::kIdentity, rng));
  layers.push_back(make_layer(bottleneck, classes, Activation::kIdentity, rng));
  return layers;
}

LayerCache layer_forward(const Layer& layer, const Matrix& input) {
  if (input.cols() != layer.spec.in_dim) {
    fail(ErrorCode::kShape, "forward: input width " + std::to_string(input.cols()) +
                                " does not match layer input " +
                                std::to_string(layer.spec.in_dim));
  }
  LayerCache cache;
  cache.input = input;
  cache.pre = matmul_transposed(input, layer.weight);
  for (std::size_t r = 0; r < cache.pre.rows(); ++r) {
    auto row = cache.pre.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += layer.bias[c];
  }
  cache.out = cache.pre;
  if (layer.spec.activation == Activation::kRelu) {
    for (double& v : cache.out.data()) v = v > 0.0 ? v : 0.0;
  }
  return cache;
}

std::vector<LayerCache> run_stack(const std::vector<Layer>& layers, const Matrix& input,
                                  double dropout, Rng* rng) {
  std::vector<LayerCache> caches;
  caches.reserve(layers.size());
  const Matrix* current = &input;
  for (const Layer& layer : layers) {
    caches.push_back(layer_forward(layer, *current));
    LayerCache& cache = caches.back();
    if (rng != nullptr && dropout > 0.0 && layer.spec.activation == Activation::kRelu) {
      const double keep = 1.0 - dropout;
      cache.dropout_mask = Matrix(cache.out.rows(), cache.out.cols());
      auto mask = cache.dropout_mask.data();
      auto out = cache.out.data();
      for (std::size_t i = 0; i < out.size(); ++i) {
        mask[i] = rng->uniform(0.0, 1.0) < keep ? 1.0 / keep : 0.0;
        out[i] *= mask[i];
      }
    }
    current = &cache.out;
  }
  return caches;
}

ForwardTrace run_forward(const NetworkParams& params, const Matrix& batch, double dropout,
                         Rng* rng) {
  if (params.shared.empty()) fail(ErrorCode::kShape, "forward: network has no trunk");
  if (batch.cols() != params.input_dim()) {
    fail(ErrorCode::kShape, "forward: batch has " + std::to_string(batch.cols()) +
                                " columns, network expects " +
                                std::to_string(params.input_dim()));
  }
  ForwardTrace trace;
  trace.shared = run_stack(params.shared, batch, dropout, rng);
  const Matrix& z = trace.shared.back().out;
  if (params.has_branch1()) trace.branch1 = run_stack(params.branch1, z, 0.0, nullptr);
  if (params.has_branch2()) trace.branch2 = run_stack(params.branch2, z, 0.0, nullptr);
  return trace;
}

void check_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    fail(ErrorCode::kShape, std::string("backward: ") + what + " shape mismatch");
  }
}

// Backpropagates grad_out through `layers`, writing parameter gradients into
// `grads` and returning the gradient with respect to the stack input.
// `extra_at_first` is added to the first layer's output gradient.
Matrix stack_backward(const std::vector<Layer>& layers, const std::vector<LayerCache>& caches,
                      Matrix grad_out, const Matrix* extra_at_first,
                      std::vector<Layer>& grads) {
  for (std::size_t li = layers.size(); li-- > 0;) {
    const Layer& layer = layers[li];
    const LayerCache& cache = caches[li];
    if (li == 0 && extra_at_first != nullptr) grad_out = add(grad_out, *extra_at_first);
    if (!cache.dropout_mask.empty()) {
      auto g = grad_out.data();
      auto m = cache.dropout_mask.data();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= m[i];
    }
    if (layer.spec.activation == Activation::kRelu) {
      auto g = grad_out.data();
      auto pre = cache.pre.data();
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (!(pre[i] > 0.0)) g[i] = 0.0;
      }
    }
    Layer& gl = grads[li];
    gl.weight = matmul(transpose(grad_out), cache.input);
    gl.bias.assign(layer.spec.out_dim, 0.0);
    for (std::size_t r = 0; r < grad_out.rows(); ++r) {
      auto row = grad_out.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) gl.bias[c] += row[c];
    }
    grad_out = matmul(grad_out, layer.weight);
  }
  return grad_out;
}

void append_tensors(std::vector<NamedTensor>& out, const std::string& prefix,
                    const std::vector<Layer>& layers) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const Layer& l = layers[i];
    const std::string base = prefix + "." + std::to_string(i) + ".";
    out.push_back({base + "weight", {l.weight.rows(), l.weight.cols()},
                   {l.weight.data().begin(), l.weight.data().end()}});
    out.push_back({base + "bias", {l.bias.size()}, l.bias});
  }
}

template <typename Params, typename Fn>
void for_each_array(Params& params, Fn fn) {
  for (auto* stack : {&params.shared, &params.branch1, &params.branch2}) {
    for (auto& layer : *stack) {
      fn(layer.weight.data());
      fn(std::span(layer.bias));
    }
  }
}

}  // namespace

void Topology::validate() const {
  if (input_dim < 1 || trunk_widths.empty() || bottleneck1 < 1 || bottleneck2 < 1 ||
      classes1 < 1 || classes2 < 1) {
    fail(ErrorCode::kConfig, "topology: every dimension must be >= 1 and the trunk non-empty");
  }
  for (std::size_t w : trunk_widths) {
    if (w < 1) fail(ErrorCode::kConfig, "topology: trunk widths must be >= 1");
  }
  if (!has_branch1 && !has_branch2) fail(ErrorCode::kConfig, "topology: no branches");
}

std::size_t NetworkParams::input_dim() const {
  return shared.empty() ? 0 : shared.front().spec.in_dim;
}

std::size_t NetworkParams::trunk_dim() const {
  return shared.empty() ? 0 : shared.back().spec.out_dim;
}

NetworkParams init_network(const Topology& topology, const Rng& rng) {
  topology.validate();
  NetworkParams params;
  Rng trunk_rng = rng.split(0);
  std::size_t in = topology.input_dim;
  for (std::size_t width : topology.trunk_widths) {
    params.shared.push_back(make_layer(in, width, Activation::kRelu, trunk_rng));
    in = width;
  }
  if (topology.has_branch1) {
    params.branch1 = make_branch(in, topology.bottleneck1, topology.classes1, rng.split(1));
  }
  if (topology.has_branch2) {
    params.branch2 = make_branch(in, topology.bottleneck2, topology.classes2, rng.split(2));
  }
  return params;
}

NetworkParams zeros_like(const NetworkParams& params) {
  NetworkParams out = params;
  for_each_array(out, [](std::span<double> a) {
    for (double& v : a) v = 0.0;
  });
  return out;
}

std::size_t ForwardTrace::batch_size() const {
  return shared.empty() ? 0 : shared.front().input.rows();
}

const Matrix& ForwardTrace::z() const { return shared.back().out; }

ForwardTrace forward(const NetworkParams& params, const Matrix& batch) {
  return run_forward(params, batch, 0.0, nullptr);
}

ForwardTrace forward_train(const NetworkParams& params, const Matrix& batch, double dropout,
                           Rng& rng) {
  if (dropout < 0.0 || dropout >= 1.0) {
    fail(ErrorCode::kInvalidArgument, "forward_train: dropout must be in [0, 1)");
  }
  return run_forward(params, batch, dropout, &rng);
}

Gradients backward(const NetworkParams& params, const ForwardTrace& trace,
                   const Matrix& grad_logits1, const Matrix& grad_logits2, const Matrix& grad_x1,
                   const TaskWeights& w) {
  if (w.size() != 2) fail(ErrorCode::kInvalidArgument, "backward: expects two task weights");
  Gradients grads = zeros_like(params);
  const Matrix& z = trace.z();
  Matrix grad_z(z.rows(), z.cols());

  if (params.has_branch1()) {
    check_same_shape(grad_logits1, trace.logits1(), "grad_logits1");
    check_same_shape(grad_x1, trace.x1(), "grad_x1");
    const Matrix extra = scale(grad_x1, w[0]);
    grad_z = add(grad_z, stack_backward(params.branch1, trace.branch1,
                                        scale(grad_logits1, w[0]), &extra, grads.branch1));
  }
  if (params.has_branch2()) {
    check_same_shape(grad_logits2, trace.logits2(), "grad_logits2");
    grad_z = add(grad_z, stack_backward(params.branch2, trace.branch2,
                                        scale(grad_logits2, w[1]), nullptr, grads.branch2));
  }
  stack_backward(params.shared, trace.shared, std::move(grad_z), nullptr, grads.shared);
  return grads;
}

std::vector<NamedTensor> named_tensors(const NetworkParams& params) {
  std::vector<NamedTensor> out;
  append_tensors(out, "shared", params.shared);
  append_tensors(out, "branch1", params.branch1);
  append_tensors(out, "branch2", params.branch2);
  return out;
}

Vector flatten(const NetworkParams& params) {
  Vector out;
  for_each_array(params, [&](std::span<const double> a) { out.insert(out.end(), a.begin(), a.end()); });
  return out;
}

void unflatten(NetworkParams& params, std::span<const double> values) {
  std::size_t offset = 0;
  for_each_array(params, [&](std::span<double> a) {
    if (offset + a.size() > values.size()) fail(ErrorCode::kShape, "unflatten: too few values");
    std::copy(values.begin() + offset, values.begin() + offset + a.size(), a.begin());
    offset += a.size();
  });
  if (offset != values.size()) fail(ErrorCode::kShape, "unflatten: too many values");
}

}  // namespace dmtl
