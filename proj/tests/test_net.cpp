#include <cmath>

#include <doctest.h>

#include "dmtl/error.hpp"
#include "dmtl/eval.hpp"
#include "dmtl/losses.hpp"
#include "dmtl/net.hpp"

using namespace dmtl;

namespace {

Topology tiny() {
  Topology t;
  t.input_dim = 4;
  t.trunk_widths = {5, 3};
  t.bottleneck1 = 3;
  t.bottleneck2 = 2;
  t.classes1 = 2;
  t.classes2 = 2;
  return t;
}

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  Matrix m(r, c);
  for (double& v : m.data()) v = rng.normal();
  return m;
}

bool all_zero(const std::vector<Layer>& layers) {
  for (const Layer& l : layers) {
    for (double v : l.weight.data()) {
      if (v != 0.0) return false;
    }
    for (double v : l.bias) {
      if (v != 0.0) return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("init produces the declared shapes with zero biases") {
  const NetworkParams p = init_network(Topology{.classes1 = 20, .classes2 = 6}, Rng(1));
  REQUIRE(p.shared.size() == 2);
  CHECK(p.shared[0].weight.rows() == 32);
  CHECK(p.shared[0].weight.cols() == 16);
  CHECK(p.shared[1].weight.rows() == 16);
  REQUIRE(p.branch1.size() == 2);
  CHECK(p.branch1[0].weight.rows() == 8);
  CHECK(p.branch1[1].weight.rows() == 20);
  CHECK(p.branch2[1].weight.rows() == 6);
  CHECK(p.trunk_dim() == 16);
  for (double b : p.shared[0].bias) CHECK(b == 0.0);
  const double limit = std::sqrt(6.0 / (16 + 32));
  for (double w : p.shared[0].weight.data()) CHECK(std::abs(w) <= limit);
}

TEST_CASE("dropping a branch leaves the other parameters unchanged") {
  Topology full = tiny();
  Topology one = tiny();
  one.has_branch2 = false;
  const NetworkParams a = init_network(full, Rng(3));
  const NetworkParams b = init_network(one, Rng(3));
  CHECK_FALSE(b.has_branch2());
  CHECK(flatten({a.shared, a.branch1, {}}) == flatten(b));
}

TEST_CASE("invalid topology is rejected") {
  Topology t = tiny();
  t.has_branch1 = false;
  t.has_branch2 = false;
  CHECK_THROWS_AS(t.validate(), Error);
  t = tiny();
  t.classes1 = 0;
  CHECK_THROWS_AS(t.validate(), Error);
}

TEST_CASE("forward shapes and ReLU trunk") {
  Rng rng(2);
  const NetworkParams p = init_network(tiny(), rng);
  const Matrix batch = random_matrix(6, 4, rng);
  const ForwardTrace t = forward(p, batch);
  CHECK(t.batch_size() == 6);
  CHECK(t.z().cols() == 3);
  CHECK(t.x1().cols() == 3);
  CHECK(t.logits1().cols() == 2);
  CHECK(t.logits2().cols() == 2);
  for (double v : t.z().data()) CHECK(v >= 0.0);
  Rng drop(4);
  const ForwardTrace same = forward_train(p, batch, 0.0, drop);
  CHECK(same.logits1() == t.logits1());
  CHECK_THROWS_AS(forward(p, Matrix(2, 5)), Error);
}

TEST_CASE("backward matches finite differences of the weighted total loss") {
  Rng rng(17);
  for (int trial = 0; trial < 5; ++trial) {
    NetworkParams p = init_network(tiny(), rng.split(static_cast<std::uint64_t>(trial)));
    for (auto* stack : {&p.shared, &p.branch1, &p.branch2}) {
      for (Layer& l : *stack) {
        for (double& b : l.bias) b = 0.1 * rng.normal();
      }
    }
    const Matrix batch = random_matrix(5, 4, rng);
    const std::vector<int> y1{0, 1, 1, 0, 1};
    const std::vector<int> y2{1, 1, 0, 0, 1};
    const CenterBank bank{random_matrix(2, 3, rng), 0.5};
    const TaskWeights w({0.3, 0.7});
    const ForwardTrace t = forward(p, batch);
    const TaskLosses tl = task_losses(t, y1, y2, bank, 0.2);
    const Vector g = flatten(backward(p, t, tl.grad_logits1, tl.grad_logits2, tl.grad_x1, w));
    NetworkParams probe = p;
    const double worst = fd_gradient_check(
        [&](std::span<const double> v) {
          unflatten(probe, v);
          return task_losses(forward(probe, batch), y1, y2, bank, 0.2).values.total(w);
        },
        g, flatten(p));
    CHECK(worst < 1e-6);
  }
}

TEST_CASE("a zero task weight zeroes that branch's gradient") {
  Rng rng(8);
  const NetworkParams p = init_network(tiny(), rng);
  const Matrix batch = random_matrix(4, 4, rng);
  const std::vector<int> y1{0, 1, 0, 1};
  const std::vector<int> y2{1, 0, 0, 1};
  const CenterBank bank = CenterBank::zeros(2, 3, 0.5);
  const ForwardTrace t = forward(p, batch);
  const TaskLosses tl = task_losses(t, y1, y2, bank, 1e-4);
  const Gradients g1 =
      backward(p, t, tl.grad_logits1, tl.grad_logits2, tl.grad_x1, TaskWeights({1.0, 0.0}));
  CHECK(all_zero(g1.branch2));
  CHECK_FALSE(all_zero(g1.branch1));
  const Gradients g2 =
      backward(p, t, tl.grad_logits1, tl.grad_logits2, tl.grad_x1, TaskWeights({0.0, 1.0}));
  CHECK(all_zero(g2.branch1));
}

TEST_CASE("flatten, unflatten and tensor names") {
  const NetworkParams p = init_network(tiny(), Rng(5));
  NetworkParams q = zeros_like(p);
  unflatten(q, flatten(p));
  CHECK(flatten(q) == flatten(p));
  const std::vector<NamedTensor> named = named_tensors(p);
  CHECK(named.front().name == "shared.0.weight");
  CHECK(named.front().shape == std::vector<std::size_t>{5, 4});
  CHECK(named.back().name == "branch2.1.bias");
  CHECK_THROWS_AS(unflatten(q, Vector(3)), Error);
}
