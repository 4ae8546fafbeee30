#include <cmath>

#include <doctest.h>

#include "dmtl/error.hpp"
#include "dmtl/eval.hpp"
#include "dmtl/weight_unit.hpp"

using namespace dmtl;

namespace {

WeightUnitParams random_unit(Rng& rng, std::size_t dz, double scale = 1.0) {
  WeightUnitParams u = WeightUnitParams::zeros(2, dz);
  for (double& v : u.psi.data()) v = scale * rng.normal();
  return u;
}

Vector random_z(Rng& rng, std::size_t dz) {
  Vector z(dz);
  for (double& v : z) v = rng.normal();
  return z;
}

double numeric_df(const WeightUnitParams& unit, std::span<const double> z,
                  std::span<const double> losses, std::size_t row, std::size_t col) {
  const double h = 1e-6;
  WeightUnitParams p = unit;
  p.psi(row, col) += h;
  const double up = l3_loss(compute_weights(p, z).w, losses);
  p.psi(row, col) -= 2 * h;
  const double down = l3_loss(compute_weights(p, z).w, losses);
  return (up - down) / (2 * h);
}

}  // namespace

TEST_CASE("zero parameters give uniform weights") {
  const WeightUnitParams u = WeightUnitParams::zeros(2, 4);
  const WeightTrace t = compute_weights(u, Vector{1, -2, 3, 0.5});
  CHECK(t.w[0] == 0.5);
  CHECK(t.w[1] == 0.5);
  CHECK(t.a == Vector{1.0, 1.0});
}

TEST_CASE("normalization feeds a unit vector to the unit") {
  WeightUnitParams u = WeightUnitParams::zeros(2, 2);
  const WeightTrace t = compute_weights(u, Vector{3, 4});
  CHECK(t.z_used[0] == doctest::Approx(0.6));
  u.normalize_z = false;
  CHECK(compute_weights(u, Vector{3, 4}).z_used == Vector{3, 4});
  CHECK_THROWS_AS(compute_weights(u, Vector{1, 2, 3}), Error);
}

TEST_CASE("weights stay on the simplex") {
  Rng rng(11);
  for (int t = 0; t < 200; ++t) {
    WeightUnitParams u = random_unit(rng, 5);
    u.normalize_z = t % 2 == 0;
    const TaskWeights w = compute_weights(u, random_z(rng, 5)).w;
    CHECK(w[0] > 0.0);
    CHECK(w[1] > 0.0);
    CHECK(w[0] + w[1] == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("L3 value and loss floor") {
  const TaskWeights w({0.25, 0.75});
  const double losses[] = {2.0, 0.5};
  CHECK(l3_loss(w, losses) == doctest::Approx(0.25 / 2.0 + 0.75 / 0.5).epsilon(1e-15));
  const double tiny[] = {1e-9, 1.0};
  CHECK_THROWS_AS(l3_loss(w, tiny), Error);
  const double nan[] = {std::nan(""), 1.0};
  CHECK_THROWS_AS(l3_loss(w, nan), Error);
  const Vector clamped = clamp_losses(tiny);
  CHECK(clamped[0] == kLossFloor);
  CHECK_NOTHROW(l3_loss(w, clamped));
  try {
    l3_loss(w, tiny);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kLossFloor);
  }
}

TEST_CASE("full-Jacobian gradient matches finite differences") {
  Rng rng(5);
  for (int t = 0; t < 10; ++t) {
    WeightUnitParams u = random_unit(rng, 4, 0.5);
    const Vector z = random_z(rng, 4);
    const double losses[] = {rng.uniform(0.2, 3.0), rng.uniform(0.2, 3.0)};
    const WeightUnitGradient g =
        l3_gradient(compute_weights(u, z), losses, GradientMode::kFullJacobian);
    for (std::size_t i = 0; i < 2; ++i) {
      for (std::size_t k = 0; k < 4; ++k) {
        const double fd = numeric_df(u, z, losses, i, k);
        CHECK(std::abs(fd - g.psi(i, k)) / std::max(std::abs(g.psi(i, k)), 1e-12) < 1e-7);
      }
    }
  }
}

TEST_CASE("diagonal gradient is (1/L_i) w_i (1 - w_i) Z") {
  WeightUnitParams u = WeightUnitParams::zeros(2, 3);
  u.psi = Matrix::from_rows({{0.3, -0.2, 0.1}, {0.0, 0.4, -0.5}});
  u.normalize_z = false;
  const Vector z{0.7, -1.1, 0.4};
  const double losses[] = {1.5, 0.6};
  const WeightTrace t = compute_weights(u, z);
  const WeightUnitGradient g = l3_gradient(t, losses, GradientMode::kPaperDiagonal);
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t k = 0; k < 3; ++k) {
      CHECK(g.psi(i, k) ==
            doctest::Approx(t.w[i] * (1.0 - t.w[i]) / losses[i] * z[k]).epsilon(1e-14));
    }
  }
}

TEST_CASE("total-loss gradient matches finite differences") {
  Rng rng(9);
  WeightUnitParams u = random_unit(rng, 3);
  const Vector z = random_z(rng, 3);
  const double losses[] = {2.5, 0.7};
  const WeightUnitGradient g = total_loss_gradient(compute_weights(u, z), losses);
  const double worst = fd_gradient_check(
      [&](std::span<const double> v) {
        WeightUnitParams p = u;
        std::copy(v.begin(), v.end(), p.psi.data().begin());
        return weighted_total(compute_weights(p, z).w, losses);
      },
      g.psi.data(), u.psi.data());
  CHECK(worst < 1e-7);
}

TEST_CASE("closed-form ratio for L = (2, 1), a = (1, 1), ZZ^T = 1 is e^0.125") {
  const double losses[] = {2.0, 1.0};
  const double a[] = {1.0, 1.0};
  CHECK(closed_form_ratio(losses, a, 1.0) == doctest::Approx(1.1331484530668263).epsilon(1e-15));

  // One actual step of rate 1 from zero with a unit Z reproduces it.
  WeightUnitParams u = WeightUnitParams::zeros(2, 3);
  const Vector z{0.0, 1.0, 0.0};
  apply_gradient(u, l3_gradient(compute_weights(u, z), losses, GradientMode::kPaperDiagonal), 1.0);
  const TaskWeights w = compute_weights(u, z).w;
  CHECK(w[0] / w[1] == doctest::Approx(std::exp(0.125)).epsilon(1e-14));
  CHECK(w[0] == doctest::Approx(0.5312093733737563).epsilon(1e-14));
}

TEST_CASE("one step favors the larger loss under L3 and the smaller under the total loss") {
  const double losses[] = {2.0, 1.0};
  const Vector z{0.5, 0.5};
  for (GradientMode mode : {GradientMode::kPaperDiagonal, GradientMode::kFullJacobian}) {
    WeightUnitParams u = WeightUnitParams::zeros(2, 2);
    apply_gradient(u, l3_gradient(compute_weights(u, z), losses, mode), 0.5);
    const TaskWeights w = compute_weights(u, z).w;
    CHECK(w[0] > w[1]);
  }
  WeightUnitParams naive = WeightUnitParams::zeros(2, 2);
  apply_gradient(naive, total_loss_gradient(compute_weights(naive, z), losses), 0.5);
  const TaskWeights w = compute_weights(naive, z).w;
  CHECK(w[0] < w[1]);
}

TEST_CASE("descending L3 over the simplex drives w toward the larger loss") {
  // One-dimensional scan of w1 -> w1/2 + (1-w1)/1 is minimized at w1 = 1.
  const double losses[] = {2.0, 1.0};
  double best_w1 = 0.0;
  double best = 1e300;
  for (int k = 0; k <= 100; ++k) {
    const double w1 = k / 100.0;
    const double v = l3_loss(TaskWeights({w1, 1.0 - w1}), losses);
    if (v < best) {
      best = v;
      best_w1 = w1;
    }
  }
  CHECK(best_w1 == 1.0);

  WeightUnitParams u = WeightUnitParams::zeros(2, 2);
  const Vector z{1.0, 0.0};
  for (int i = 0; i < 2000; ++i) {
    apply_gradient(u, l3_gradient(compute_weights(u, z), losses, GradientMode::kFullJacobian), 5.0);
  }
  CHECK(compute_weights(u, z).w[0] > 0.95);
}

TEST_CASE("saturated unit has a vanishing gradient that normalization restores") {
  WeightUnitParams u = WeightUnitParams::zeros(2, 2);
  u.psi = Matrix::from_rows({{0.8, 0.0}, {-0.2, 0.0}});
  u.normalize_z = false;
  const Vector z{45.0, 0.0};  // logit gap 45
  const double losses[] = {1.0, 2.0};
  const WeightTrace raw = compute_weights(u, z);
  CHECK(std::abs(raw.f[0] - raw.f[1]) >= 40.0);
  CHECK(norm2(l3_gradient(raw, losses, u.gradient_mode).psi.data()) < 1e-15);
  u.normalize_z = true;
  CHECK(norm2(l3_gradient(compute_weights(u, z), losses, u.gradient_mode).psi.data()) > 1e-6);
}

TEST_CASE("saturated weights keep a nonzero gradient") {
  WeightUnitParams u = WeightUnitParams::zeros(2, 1);
  u.psi = Matrix::from_rows({{20.0}, {0.0}});
  u.normalize_z = false;
  const Vector z{1.0};
  const double losses[] = {1.0, 1.0};
  const WeightUnitGradient g =
      l3_gradient(compute_weights(u, z), losses, GradientMode::kPaperDiagonal);
  CHECK(g.psi(0, 0) > 0.0);
  CHECK(g.psi(0, 0) == doctest::Approx(std::exp(-20.0)).epsilon(1e-6));
}

TEST_CASE("bias moves only when learned") {
  WeightUnitParams u = WeightUnitParams::zeros(2, 2);
  const Vector z{1.0, 0.0};
  const double losses[] = {2.0, 1.0};
  const WeightUnitGradient g =
      l3_gradient(compute_weights(u, z), losses, GradientMode::kPaperDiagonal);
  apply_gradient(u, g, 1.0);
  CHECK(u.bias == Vector{0.0, 0.0});
  u.learn_bias = true;
  apply_gradient(u, g, 1.0);
  CHECK(u.bias[0] != 0.0);
}
