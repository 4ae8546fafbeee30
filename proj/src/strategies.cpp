#include "dmtl/strategies.hpp"

#include "dmtl/error.hpp"

namespace dmtl {

const char* strategy_kind_name(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::kStatic: return "static";
    case StrategyKind::kSingleTask: return "single";
    case StrategyKind::kNaiveDynamic: return "naive";
    case StrategyKind::kProposedDynamic: return "proposed";
  }
  return "unknown";
}

Strategy Strategy::fixed(TaskWeights w) {
  Strategy s;
  s.kind_ = StrategyKind::kStatic;
  s.weights_ = std::move(w);
  return s;
}

Strategy Strategy::single_task(int task) {
  if (task != 1 && task != 2) {
    fail(ErrorCode::kInvalidArgument, "single_task: task must be 1 or 2");
  }
  Strategy s;
  s.kind_ = StrategyKind::kSingleTask;
  s.single_task_ = task;
  s.weights_ = TaskWeights::one_hot(2, static_cast<std::size_t>(task - 1));
  return s;
}

Strategy Strategy::naive(WeightUnitParams unit) {
  Strategy s;
  s.kind_ = StrategyKind::kNaiveDynamic;
  s.unit_ = std::move(unit);
  return s;
}

Strategy Strategy::proposed(WeightUnitParams unit) {
  Strategy s;
  s.kind_ = StrategyKind::kProposedDynamic;
  s.unit_ = std::move(unit);
  return s;
}

const TaskWeights& Strategy::fixed_weights() const {
  if (is_dynamic()) fail(ErrorCode::kInvalidArgument, "dynamic strategy has no fixed weights");
  return weights_;
}

const WeightUnitParams& Strategy::unit() const {
  if (!unit_) fail(ErrorCode::kInvalidArgument, "static strategy has no weight unit");
  return *unit_;
}

std::string Strategy::name() const {
  if (kind_ == StrategyKind::kSingleTask) return "single" + std::to_string(single_task_);
  return strategy_kind_name(kind_);
}

Strategy::StepWeights Strategy::weights_for_step(const Matrix& z_batch) const {
  if (!is_dynamic()) return {weights_, std::nullopt};
  if (z_batch.rows() == 0) fail(ErrorCode::kInvalidArgument, "weights_for_step: empty batch");
  WeightTrace trace = compute_weights(*unit_, column_mean(z_batch));
  TaskWeights w = trace.w;
  return {std::move(w), std::move(trace)};
}

Strategy update_strategy(const Strategy& strategy, const WeightTrace& trace,
                         std::span<const double> losses, double eta, double floor) {
  if (!strategy.is_dynamic()) return strategy;
  const Vector clamped = clamp_losses(losses, floor);
  Strategy next = strategy;
  WeightUnitParams& unit = *next.unit_;
  if (strategy.kind_ == StrategyKind::kProposedDynamic) {
    apply_gradient(unit, l3_gradient(trace, clamped, unit.gradient_mode, floor), eta);
  } else {
    apply_gradient(unit, total_loss_gradient(trace, clamped), eta);
  }
  return next;
}

}  // namespace dmtl
