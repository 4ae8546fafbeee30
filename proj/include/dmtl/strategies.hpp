#pragma once

#include <optional>
#include <span>
#include <string>

#include "dmtl/numerics.hpp"
#include "dmtl/task_weights.hpp"
#include "dmtl/weight_unit.hpp"

namespace dmtl {

enum class StrategyKind {
  kStatic,
  kSingleTask,
  // Unit parameters descend the weighted total loss sum_i w_i L_i.
  kNaiveDynamic,
  // Unit parameters descend L3 = sum_i w_i / L_i.
  kProposedDynamic,
};

const char* strategy_kind_name(StrategyKind kind);

/// A task-weighting regime. Static kinds hold fixed weights; dynamic kinds own
/// a weight unit whose input is the batch-mean trunk output.
class Strategy {
 public:
  static Strategy fixed(TaskWeights w);
  // task is 1 or 2.
  static Strategy single_task(int task);
  static Strategy naive(WeightUnitParams unit);
  static Strategy proposed(WeightUnitParams unit);

  StrategyKind kind() const { return kind_; }
  bool is_dynamic() const {
    return kind_ == StrategyKind::kNaiveDynamic || kind_ == StrategyKind::kProposedDynamic;
  }
  // Weights of a static kind. Throws for dynamic kinds.
  const TaskWeights& fixed_weights() const;
  // Unit of a dynamic kind. Throws for static kinds.
  const WeightUnitParams& unit() const;
  std::string name() const;

  struct StepWeights {
    TaskWeights w;
    std::optional<WeightTrace> trace;  // dynamic kinds only
  };

  StepWeights weights_for_step(const Matrix& z_batch) const;

 private:
  friend Strategy update_strategy(const Strategy&, const WeightTrace&, std::span<const double>,
                                  double, double);

  StrategyKind kind_ = StrategyKind::kStatic;
  TaskWeights weights_;
  int single_task_ = 0;
  std::optional<WeightUnitParams> unit_;
};

// One unit step using `losses` as constants. Losses are clamped at `floor`
// first. Static kinds are returned unchanged.
Strategy update_strategy(const Strategy& strategy, const WeightTrace& trace,
                         std::span<const double> losses, double eta,
                         double floor = kLossFloor);

}  // namespace dmtl
