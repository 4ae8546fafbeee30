// Self-checks run by the `verify` command.

#include <cmath>
#include <sstream>

#include "dmtl/commands.hpp"
#include "dmtl/error.hpp"
#include "dmtl/eval.hpp"
#include "dmtl/losses.hpp"
#include "dmtl/strategies.hpp"
#include "dmtl/trainer.hpp"
#include "dmtl/weight_unit.hpp"

namespace dmtl {

namespace {

constexpr double kFdStep = 1e-5;
constexpr double kGradTolerance = 1e-6;

std::string sci(double v) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << v;
  return os.str();
}

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = scale * rng.normal();
  return m;
}

std::vector<int> random_labels(std::size_t n, std::size_t classes, Rng& rng) {
  std::vector<int> out(n);
  for (int& y : out) y = static_cast<int>(rng.index(classes));
  return out;
}

CheckResult check_simplex(Rng rng) {
  for (int t = 0; t < 1000; ++t) {
    WeightUnitParams unit = WeightUnitParams::zeros(2, 8);
    unit.psi = random_matrix(2, 8, rng);
    unit.bias = {rng.normal(), rng.normal()};
    unit.normalize_z = rng.index(2) == 0;
    Vector z(8);
    for (double& v : z) v = rng.normal();
    const TaskWeights w = compute_weights(unit, z).w;
    const double sum = w[0] + w[1];
    if (!(w[0] > 0.0 && w[0] < 1.0 && w[1] > 0.0 && w[1] < 1.0) ||
        std::abs(sum - 1.0) > kSimplexTolerance) {
      return {"simplex invariant", false, "draw " + std::to_string(t) + " left the simplex"};
    }
  }
  return {"simplex invariant", true, "1000 draws"};
}

CheckResult check_cross_entropy(Rng rng) {
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    const Matrix logits = random_matrix(4, 3, rng);
    const std::vector<int> labels = random_labels(4, 3, rng);
    const LossAndGrad lg = cross_entropy(logits, labels);
    worst = std::max(worst, fd_gradient_check(
                                [&](std::span<const double> x) {
                                  return cross_entropy(Matrix(4, 3, {x.begin(), x.end()}), labels)
                                      .loss;
                                },
                                lg.grad.data(), logits.data(), kFdStep));
  }
  return {"cross-entropy gradient", worst < kGradTolerance, "max rel err " + sci(worst)};
}

CheckResult check_center_loss(Rng rng) {
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    const Matrix x = random_matrix(5, 3, rng);
    const std::vector<int> labels = random_labels(5, 4, rng);
    CenterBank bank{random_matrix(4, 3, rng), 0.5};
    const LossAndGrad lg = center_loss(x, labels, bank);
    worst = std::max(worst, fd_gradient_check(
                                [&](std::span<const double> v) {
                                  return center_loss(Matrix(5, 3, {v.begin(), v.end()}), labels,
                                                     bank)
                                      .loss;
                                },
                                lg.grad.data(), x.data(), kFdStep));
  }
  return {"center-loss gradient", worst < kGradTolerance, "max rel err " + sci(worst)};
}

CheckResult check_network(Rng rng, bool corrupt) {
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    Topology topo;
    topo.input_dim = 4;
    topo.trunk_widths = {5, 3};
    topo.bottleneck1 = 3;
    topo.bottleneck2 = 2;
    topo.classes1 = 2;
    topo.classes2 = 2;
    NetworkParams net = init_network(topo, rng.split(static_cast<std::uint64_t>(t)));
    // Non-zero biases so the ReLU pattern is not symmetric around zero.
    for (auto* stack : {&net.shared, &net.branch1, &net.branch2}) {
      for (Layer& l : *stack) {
        for (double& b : l.bias) b = 0.1 * rng.normal();
      }
    }
    const Matrix batch = random_matrix(6, 4, rng);
    const std::vector<int> y1 = random_labels(6, 2, rng);
    const std::vector<int> y2 = random_labels(6, 2, rng);
    const CenterBank bank{random_matrix(2, 3, rng), 0.5};
    const double alpha = 0.1;
    const double u = rng.uniform(0.05, 0.95);
    const TaskWeights w({u, 1.0 - u});

    auto loss = [&](const NetworkParams& p) {
      const TaskLosses tl = task_losses(forward(p, batch), y1, y2, bank, alpha);
      return tl.values.total(w);
    };
    const ForwardTrace trace = forward(net, batch);
    const TaskLosses tl = task_losses(trace, y1, y2, bank, alpha);
    Vector analytic =
        flatten(backward(net, trace, tl.grad_logits1, tl.grad_logits2, tl.grad_x1, w));
    if (corrupt) analytic[analytic.size() / 2] *= 1.01;
    NetworkParams probe = net;
    worst = std::max(worst, fd_gradient_check(
                                [&](std::span<const double> v) {
                                  unflatten(probe, v);
                                  return loss(probe);
                                },
                                analytic, flatten(net), kFdStep));
  }
  return {"network total-loss gradient", worst < kGradTolerance, "max rel err " + sci(worst)};
}

CheckResult check_l3_gradient(Rng rng) {
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    WeightUnitParams unit = WeightUnitParams::zeros(2, 5);
    unit.psi = random_matrix(2, 5, rng, 0.5);
    unit.bias = {0.2 * rng.normal(), 0.2 * rng.normal()};
    Vector z(5);
    for (double& v : z) v = rng.normal();
    const double losses[] = {rng.uniform(0.2, 3.0), rng.uniform(0.2, 3.0)};
    const WeightTrace trace = compute_weights(unit, z);
    const WeightUnitGradient g = l3_gradient(trace, losses, GradientMode::kFullJacobian);
    WeightUnitParams probe = unit;
    worst = std::max(worst, fd_gradient_check(
                                [&](std::span<const double> v) {
                                  std::copy(v.begin(), v.end(), probe.psi.data().begin());
                                  return l3_loss(compute_weights(probe, z).w, losses);
                                },
                                g.psi.data(), unit.psi.data(), kFdStep));
  }
  return {"L3 gradient (full Jacobian)", worst < kGradTolerance, "max rel err " + sci(worst)};
}

CheckResult check_ordering(Rng rng) {
  int proposed_ok = 0;
  int naive_ok = 0;
  for (int t = 0; t < 100; ++t) {
    double l1 = rng.uniform(0.1, 5.0);
    double l2 = rng.uniform(0.1, 5.0);
    if (l1 == l2) l2 += 0.5;
    const double losses[] = {l1, l2};
    Matrix z(1, 6);
    for (double& v : z.data()) v = std::abs(rng.normal()) + 0.01;
    const double eta = rng.uniform(0.01, 1.0);
    const bool task1_harder = l1 > l2;

    bool all_modes = true;
    for (GradientMode mode : {GradientMode::kPaperDiagonal, GradientMode::kFullJacobian}) {
      WeightUnitParams unit = WeightUnitParams::zeros(2, 6);
      unit.gradient_mode = mode;
      const Strategy s = Strategy::proposed(unit);
      const auto sw = s.weights_for_step(z);
      const TaskWeights after = update_strategy(s, *sw.trace, losses, eta).weights_for_step(z).w;
      all_modes = all_modes && ((after[0] > after[1]) == task1_harder) && after[0] != after[1];
    }
    proposed_ok += all_modes ? 1 : 0;

    const Strategy naive = Strategy::naive(WeightUnitParams::zeros(2, 6));
    const auto sw = naive.weights_for_step(z);
    const TaskWeights after = update_strategy(naive, *sw.trace, losses, eta).weights_for_step(z).w;
    naive_ok += ((after[0] < after[1]) == task1_harder && after[0] != after[1]) ? 1 : 0;
  }
  return {"one-step ordering (proposed favors hard task, naive inverted)",
          proposed_ok == 100 && naive_ok == 100,
          "proposed " + std::to_string(proposed_ok) + "/100, naive " + std::to_string(naive_ok) +
              "/100"};
}

CheckResult check_oracle(const RunConfig& config) {
  double worst = 0.0;
  for (std::uint64_t t = 0; t < 20; ++t) {
    SynthConfig sc;
    sc.n_identities = 4;
    sc.n_expressions = 3;
    sc.samples_per_cell = 8;
    sc.seed = 100 + t;
    const Dataset data = generate(sc);
    TrainConfig tc = config.train;
    tc.strategy = StrategyKind::kProposedDynamic;
    tc.gradient_mode = GradientMode::kPaperDiagonal;
    tc.lr_psi = 0.1 + 0.04 * static_cast<double>(t);
    tc.batch_size = 16;
    tc.loss_ema = 0.0;
    tc.seed = 7 + t;
    Trainer trainer(data, tc);
    trainer.step();
    const StepInfo& info = trainer.last_step();
    const TaskWeights actual = compute_weights(trainer.strategy().unit(), info.z_mean).w;
    const TaskWeights predicted =
        one_step_oracle(info.unit_losses, info.unit_trace->z_used, info.lr_psi);
    worst = std::max({worst, std::abs(actual[0] - predicted[0]),
                      std::abs(actual[1] - predicted[1])});
  }
  const double l[] = {2.0, 1.0};
  const double a[] = {1.0, 1.0};
  const double ratio = closed_form_ratio(l, a, 1.0);
  const double expected = std::exp(0.125);
  const bool ok = worst < 1e-9 && std::abs(ratio - expected) < 1e-12;
  return {"one-step oracle agreement", ok,
          "max abs diff " + sci(worst) + ", ratio(L=(2,1)) = " + std::to_string(ratio)};
}

CheckResult check_vanishing(Rng rng) {
  double worst_raw = 0.0;
  double weakest_normalized = 1e300;
  for (int t = 0; t < 20; ++t) {
    WeightUnitParams unit = WeightUnitParams::zeros(2, 6);
    Vector diff;
    do {
      unit.psi = random_matrix(2, 6, rng);
      for (std::size_t i = 0; i < 2; ++i) {
        const double n = norm2(unit.psi.row(i));
        const double target = rng.uniform(0.5, 1.0);
        for (double& v : unit.psi.row(i)) v *= target / n;
      }
      diff = Vector(6);
      for (std::size_t k = 0; k < 6; ++k) diff[k] = unit.psi(0, k) - unit.psi(1, k);
    } while (norm2(diff) < 0.5);
    // Z along psi_1 - psi_2, scaled so the unit's logit gap is 45.
    const double gap = 45.0;
    Vector z = l2_normalize(diff);
    for (double& v : z) v *= gap / norm2(diff);
    const double losses[] = {rng.uniform(0.5, 3.0), rng.uniform(0.5, 3.0)};

    unit.normalize_z = false;
    const WeightTrace raw = compute_weights(unit, z);
    worst_raw = std::max(worst_raw,
                         norm2(l3_gradient(raw, losses, unit.gradient_mode).psi.data()));
    unit.normalize_z = true;
    const WeightTrace normalized = compute_weights(unit, z);
    weakest_normalized = std::min(
        weakest_normalized, norm2(l3_gradient(normalized, losses, unit.gradient_mode).psi.data()));
  }
  return {"gradient vanishing and normalization fix",
          worst_raw < 1e-15 && weakest_normalized > 1e-6,
          "unnormalized max |grad| " + sci(worst_raw) + ", normalized min |grad| " +
              sci(weakest_normalized)};
}

}  // namespace

std::vector<CheckResult> cmd_verify(const RunConfig& config, bool corrupt_gradient) {
  config.validate();
  const Rng root(config.train.seed);
  std::vector<CheckResult> results;
  auto guarded = [&](const char* name, auto fn) {
    try {
      results.push_back(fn());
    } catch (const std::exception& e) {
      results.push_back({name, false, std::string("threw: ") + e.what()});
    }
  };
  guarded("simplex invariant", [&] { return check_simplex(root.split(1)); });
  guarded("cross-entropy gradient", [&] { return check_cross_entropy(root.split(2)); });
  guarded("center-loss gradient", [&] { return check_center_loss(root.split(3)); });
  guarded("network total-loss gradient",
          [&] { return check_network(root.split(4), corrupt_gradient); });
  guarded("L3 gradient", [&] { return check_l3_gradient(root.split(5)); });
  guarded("one-step ordering", [&] { return check_ordering(root.split(6)); });
  guarded("one-step oracle agreement", [&] { return check_oracle(config); });
  guarded("gradient vanishing", [&] { return check_vanishing(root.split(7)); });
  return results;
}

}  // namespace dmtl
