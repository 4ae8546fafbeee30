#pragma once

#include <cstddef>
#include <span>

#include "dmtl/numerics.hpp"
#include "dmtl/task_weights.hpp"

namespace dmtl {

enum class GradientMode {
  // Only the d w_i / d psi_i term, scaled by 1/L_i.
  kPaperDiagonal,
  // Complete derivative sum_j (1/L_j) d w_j / d psi_i.
  kFullJacobian,
};

inline constexpr double kLossFloor = 1e-8;

/// Parameters of the dynamic-weight unit: one affine map f_i(Z) = psi_i . Z + b_i
/// per task followed by a softmax over tasks.
struct WeightUnitParams {
  Matrix psi;   // tasks x d_z
  Vector bias;  // tasks
  bool normalize_z = true;
  GradientMode gradient_mode = GradientMode::kPaperDiagonal;
  // Biases stay at their initial value unless set; with zero biases this keeps
  // the weight ratio a pure function of (psi_1 - psi_2) . Z.
  bool learn_bias = false;

  static WeightUnitParams zeros(std::size_t tasks, std::size_t dz);

  std::size_t num_tasks() const { return psi.rows(); }
  std::size_t feature_dim() const { return psi.cols(); }
};

struct WeightTrace {
  Vector z_used;  // Z after optional L2 normalization
  Vector f;       // unit logits
  Vector a;       // exp(f); may overflow to inf, diagnostics only
  TaskWeights w;
};

struct WeightUnitGradient {
  Matrix psi;
  Vector bias;
};

WeightTrace compute_weights(const WeightUnitParams& params, std::span<const double> z);

// Clamps each loss from below at `floor`.
Vector clamp_losses(std::span<const double> losses, double floor = kLossFloor);

// L3 = sum_i w_i / L_i with the L_i held constant. Throws kLossFloor if any
// loss is below `floor` or non-finite.
double l3_loss(const TaskWeights& w, std::span<const double> losses, double floor = kLossFloor);

// Gradient of L3 with respect to the unit parameters.
WeightUnitGradient l3_gradient(const WeightTrace& trace, std::span<const double> losses,
                               GradientMode mode, double floor = kLossFloor);

// Gradient of sum_i w_i L_i with respect to the unit parameters (losses
// constant): the rule that lets a total-loss objective drive the weights.
WeightUnitGradient total_loss_gradient(const WeightTrace& trace,
                                       std::span<const double> losses);

// psi -= eta * g.psi; bias likewise when params.learn_bias.
void apply_gradient(WeightUnitParams& params, const WeightUnitGradient& g, double eta);

// Predicted w_1 / w_2 after one unit step from zero parameters:
// exp((1/L_2 - 1/L_1) * a_1 a_2 / (a_1 + a_2)^2 * ZZ^T).
double closed_form_ratio(std::span<const double> losses, std::span<const double> a, double zzt);

}  // namespace dmtl
