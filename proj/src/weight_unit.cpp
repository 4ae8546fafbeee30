#include "dmtl/weight_unit.hpp"

#include <cmath>
#include <sstream>

#include "dmtl/error.hpp"

namespace dmtl {

WeightUnitParams WeightUnitParams::zeros(std::size_t tasks, std::size_t dz) {
  WeightUnitParams p;
  p.psi = Matrix(tasks, dz);
  p.bias = Vector(tasks, 0.0);
  return p;
}

WeightTrace compute_weights(const WeightUnitParams& params, std::span<const double> z) {
  if (z.size() != params.feature_dim()) {
    fail(ErrorCode::kShape, "compute_weights: Z dimension does not match psi");
  }
  if (!all_finite(z)) fail(ErrorCode::kInvalidArgument, "compute_weights: non-finite Z");

  WeightTrace trace;
  trace.z_used = params.normalize_z ? l2_normalize(z) : Vector(z.begin(), z.end());
  const std::size_t tasks = params.num_tasks();
  trace.f.resize(tasks);
  trace.a.resize(tasks);
  for (std::size_t i = 0; i < tasks; ++i) {
    trace.f[i] = dot(params.psi.row(i), trace.z_used) + params.bias[i];
    trace.a[i] = std::exp(trace.f[i]);
  }
  trace.w = TaskWeights(softmax(trace.f));
  return trace;
}

Vector clamp_losses(std::span<const double> losses, double floor) {
  Vector out(losses.begin(), losses.end());
  for (double& v : out) {
    if (v < floor) v = floor;
  }
  return out;
}

namespace {

void check_losses(std::span<const double> losses, std::size_t tasks, double floor) {
  if (losses.size() != tasks) fail(ErrorCode::kShape, "loss count does not match task count");
  for (double l : losses) {
    if (!std::isfinite(l) || l < floor) {
      std::ostringstream os;
      os << "task loss " << l << " is below the floor " << floor;
      fail(ErrorCode::kLossFloor, os.str());
    }
  }
}

// Sum over j != i of w_j * term(i, j), accumulated without forming 1 - w_i so
// that saturated weights keep their tiny complements.
template <typename Term>
Vector logit_gradient(const TaskWeights& w, Term term) {
  Vector g(w.size(), 0.0);
  for (std::size_t i = 0; i < w.size(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) {
      if (j != i) s += w[j] * term(i, j);
    }
    g[i] = w[i] * s;
  }
  return g;
}

WeightUnitGradient expand(const Vector& dlogits, const Vector& z) {
  WeightUnitGradient g;
  g.psi = Matrix(dlogits.size(), z.size());
  g.bias = dlogits;
  for (std::size_t i = 0; i < dlogits.size(); ++i) {
    for (std::size_t k = 0; k < z.size(); ++k) g.psi(i, k) = dlogits[i] * z[k];
  }
  return g;
}

}  // namespace

double l3_loss(const TaskWeights& w, std::span<const double> losses, double floor) {
  check_losses(losses, w.size(), floor);
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) total += w[i] / losses[i];
  return total;
}

WeightUnitGradient l3_gradient(const WeightTrace& trace, std::span<const double> losses,
                               GradientMode mode, double floor) {
  check_losses(losses, trace.w.size(), floor);
  Vector dlogits;
  if (mode == GradientMode::kPaperDiagonal) {
    dlogits = logit_gradient(trace.w, [&](std::size_t i, std::size_t) { return 1.0 / losses[i]; });
  } else {
    dlogits = logit_gradient(trace.w, [&](std::size_t i, std::size_t j) {
      return 1.0 / losses[i] - 1.0 / losses[j];
    });
  }
  return expand(dlogits, trace.z_used);
}

WeightUnitGradient total_loss_gradient(const WeightTrace& trace,
                                       std::span<const double> losses) {
  if (losses.size() != trace.w.size()) {
    fail(ErrorCode::kShape, "loss count does not match task count");
  }
  const Vector dlogits = logit_gradient(
      trace.w, [&](std::size_t i, std::size_t j) { return losses[i] - losses[j]; });
  return expand(dlogits, trace.z_used);
}

void apply_gradient(WeightUnitParams& params, const WeightUnitGradient& g, double eta) {
  if (g.psi.rows() != params.psi.rows() || g.psi.cols() != params.psi.cols()) {
    fail(ErrorCode::kShape, "apply_gradient: gradient shape does not match psi");
  }
  auto p = params.psi.data();
  auto d = g.psi.data();
  for (std::size_t i = 0; i < p.size(); ++i) p[i] -= eta * d[i];
  if (params.learn_bias) {
    for (std::size_t i = 0; i < params.bias.size(); ++i) params.bias[i] -= eta * g.bias[i];
  }
}

double closed_form_ratio(std::span<const double> losses, std::span<const double> a, double zzt) {
  if (losses.size() != 2 || a.size() != 2) {
    fail(ErrorCode::kInvalidArgument, "closed_form_ratio: defined for two tasks");
  }
  if (!(losses[0] > 0.0) || !(losses[1] > 0.0)) {
    fail(ErrorCode::kInvalidArgument, "closed_form_ratio: losses must be positive");
  }
  const double coupling = a[0] * a[1] / ((a[0] + a[1]) * (a[0] + a[1]));
  return std::exp((1.0 / losses[1] - 1.0 / losses[0]) * coupling * zzt);
}

}  // namespace dmtl
