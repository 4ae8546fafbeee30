#pragma once

#include <span>

#include "dmtl/net.hpp"
#include "dmtl/numerics.hpp"
#include "dmtl/task_weights.hpp"

namespace dmtl {

struct LossAndGrad {
  double loss = 0.0;
  Matrix grad;
};

// Batch-mean softmax cross-entropy; grad = (softmax - onehot) / n.
LossAndGrad cross_entropy(const Matrix& logits, std::span<const int> labels);

enum class CenterLossMode {
  kSquared,  // mean of 0.5 ||x - c||^2
  kLiteral,  // mean of ||x - c||, zero gradient within 1e-12 of the center
};

struct CenterBank {
  Matrix centers;  // classes x embedding dim
  double rate = 0.5;

  static CenterBank zeros(std::size_t classes, std::size_t dim, double rate);
};

LossAndGrad center_loss(const Matrix& x1, std::span<const int> labels, const CenterBank& bank,
                        CenterLossMode mode = CenterLossMode::kSquared);

// C_y <- C_y - rate * mean_{k: y_k = y}(C_y - x_k); classes absent from the
// batch keep their center.
CenterBank update_centers(const CenterBank& bank, const Matrix& x1, std::span<const int> labels);

/// Per-task losses of one batch. l1 = ls1 + alpha * lc.
struct LossValues {
  double l1 = 0.0;
  double l2 = 0.0;
  double ls1 = 0.0;
  double lc = 0.0;

  double total(const TaskWeights& w) const;
};

struct TaskLosses {
  LossValues values;
  Matrix grad_logits1;
  Matrix grad_logits2;
  Matrix grad_x1;  // alpha * d lc / d x1
};

// Absent branches contribute zero loss and empty gradients; the matching label
// span may then be empty.
TaskLosses task_losses(const ForwardTrace& trace, std::span<const int> labels1,
                       std::span<const int> labels2, const CenterBank& bank, double alpha,
                       CenterLossMode mode = CenterLossMode::kSquared);

}  // namespace dmtl
