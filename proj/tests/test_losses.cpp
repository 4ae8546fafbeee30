#include <cmath>

#include <doctest.h>

#include "dmtl/error.hpp"
#include "dmtl/eval.hpp"
#include "dmtl/losses.hpp"

using namespace dmtl;

TEST_CASE("cross-entropy of uniform logits is ln K") {
  const Matrix logits(3, 5, 0.7);
  const std::vector<int> labels{0, 2, 4};
  const LossAndGrad lg = cross_entropy(logits, labels);
  CHECK(lg.loss == doctest::Approx(std::log(5.0)).epsilon(1e-15));
  CHECK(lg.grad(0, 0) == doctest::Approx((0.2 - 1.0) / 3.0));
  CHECK(lg.grad(0, 1) == doctest::Approx(0.2 / 3.0));
}

TEST_CASE("cross-entropy hand value") {
  const Matrix logits = Matrix::from_rows({{2.0, 0.0}});
  const std::vector<int> labels{0};
  CHECK(cross_entropy(logits, labels).loss ==
        doctest::Approx(std::log(1.0 + std::exp(-2.0))).epsilon(1e-15));
}

TEST_CASE("cross-entropy gradient matches finite differences (K=3, n=2)") {
  const Matrix logits = Matrix::from_rows({{0.3, -1.2, 2.0}, {1.1, 0.4, -0.6}});
  const std::vector<int> labels{2, 0};
  const LossAndGrad lg = cross_entropy(logits, labels);
  const double worst = fd_gradient_check(
      [&](std::span<const double> v) {
        return cross_entropy(Matrix(2, 3, {v.begin(), v.end()}), labels).loss;
      },
      lg.grad.data(), logits.data());
  CHECK(worst < 1e-7);
}

TEST_CASE("cross-entropy rejects bad labels") {
  const Matrix logits(2, 3);
  CHECK_THROWS_AS(cross_entropy(logits, std::vector<int>{0, 3}), Error);
  CHECK_THROWS_AS(cross_entropy(logits, std::vector<int>{0}), Error);
}

TEST_CASE("center loss values") {
  const Matrix x = Matrix::from_rows({{1.0, 0.0}, {0.0, 3.0}});
  const std::vector<int> labels{0, 1};
  CenterBank bank = CenterBank::zeros(2, 2, 0.5);
  CHECK(center_loss(x, labels, bank).loss == doctest::Approx((0.5 * 1.0 + 0.5 * 9.0) / 2.0));
  CHECK(center_loss(x, labels, bank, CenterLossMode::kLiteral).loss ==
        doctest::Approx((1.0 + 3.0) / 2.0));
  bank.centers = x;
  const LossAndGrad at_center = center_loss(x, labels, bank, CenterLossMode::kLiteral);
  CHECK(at_center.loss == 0.0);
  for (double g : at_center.grad.data()) CHECK(g == 0.0);
}

TEST_CASE("center loss gradient matches finite differences") {
  Rng rng(4);
  Matrix x(5, 3);
  for (double& v : x.data()) v = rng.normal();
  CenterBank bank = CenterBank::zeros(3, 3, 0.5);
  for (double& v : bank.centers.data()) v = rng.normal();
  const std::vector<int> labels{0, 2, 2, 1, 0};
  for (CenterLossMode mode : {CenterLossMode::kSquared, CenterLossMode::kLiteral}) {
    const LossAndGrad lg = center_loss(x, labels, bank, mode);
    const double worst = fd_gradient_check(
        [&](std::span<const double> v) {
          return center_loss(Matrix(5, 3, {v.begin(), v.end()}), labels, bank, mode).loss;
        },
        lg.grad.data(), x.data());
    CHECK(worst < 1e-6);
  }
}

TEST_CASE("center update moves present classes toward their batch mean") {
  const CenterBank bank = CenterBank::zeros(2, 2, 0.5);
  const Matrix x = Matrix::from_rows({{2.0, 0.0}, {4.0, 2.0}});
  const std::vector<int> labels{0, 0};
  const CenterBank next = update_centers(bank, x, labels);
  CHECK(next.centers(0, 0) == doctest::Approx(1.5));
  CHECK(next.centers(0, 1) == doctest::Approx(0.5));
  CHECK(next.centers(1, 0) == 0.0);
}

TEST_CASE("composite task-1 loss adds alpha times the center loss") {
  Rng rng(6);
  NetworkParams p = init_network(
      Topology{.input_dim = 3, .trunk_widths = {4}, .bottleneck1 = 2, .bottleneck2 = 2,
               .classes1 = 3, .classes2 = 2},
      rng);
  Matrix batch(4, 3);
  for (double& v : batch.data()) v = rng.normal();
  const std::vector<int> y1{0, 1, 2, 1};
  const std::vector<int> y2{1, 0, 1, 0};
  CenterBank bank = CenterBank::zeros(3, 2, 0.5);
  bank.centers(1, 0) = 1.0;
  const ForwardTrace t = forward(p, batch);
  const TaskLosses tl = task_losses(t, y1, y2, bank, 0.25);
  CHECK(tl.values.ls1 == doctest::Approx(cross_entropy(t.logits1(), y1).loss));
  CHECK(tl.values.lc == doctest::Approx(center_loss(t.x1(), y1, bank).loss));
  CHECK(tl.values.l1 == doctest::Approx(tl.values.ls1 + 0.25 * tl.values.lc));
  CHECK(tl.values.l2 == doctest::Approx(cross_entropy(t.logits2(), y2).loss));
  const TaskWeights w({0.4, 0.6});
  CHECK(tl.values.total(w) == doctest::Approx(0.4 * tl.values.l1 + 0.6 * tl.values.l2).epsilon(1e-12));
}
