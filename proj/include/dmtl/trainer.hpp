#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "dmtl/error.hpp"
#include "dmtl/losses.hpp"
#include "dmtl/net.hpp"
#include "dmtl/strategies.hpp"
#include "dmtl/synthdata.hpp"

namespace dmtl {

enum class OptimizerKind { kSgdMomentum, kRmsprop };

struct TrainConfig {
  StrategyKind strategy = StrategyKind::kProposedDynamic;
  double static_w1 = 0.5;  // kStatic
  int single_task = 1;     // kSingleTask

  double lr = 0.05;
  double lr_psi = 0.05;
  std::vector<std::size_t> lr_milestones;  // step indices where the rate drops
  double lr_decay_factor = 0.1;

  OptimizerKind optimizer = OptimizerKind::kSgdMomentum;
  double momentum = 0.9;
  double rmsprop_rho = 0.99;
  double rmsprop_eps = 1e-8;
  double weight_decay = 5e-5;

  std::size_t batch_size = 64;
  std::size_t steps = 2000;

  double alpha = 1e-4;
  double center_rate = 0.5;
  CenterLossMode center_mode = CenterLossMode::kSquared;

  double loss_floor = kLossFloor;
  double loss_ema = 0.0;  // 0 = raw batch losses feed the unit step
  bool normalize_z = true;
  GradientMode gradient_mode = GradientMode::kPaperDiagonal;
  bool learn_bias = false;

  std::vector<std::size_t> trunk_widths = {32, 16};
  std::size_t bottleneck = 8;
  bool has_branch1 = true;
  bool has_branch2 = true;
  double dropout = 0.0;

  // Apply the unit step before the network step. Both consume pre-step state,
  // so the log must not depend on this.
  bool psi_step_first = false;

  std::uint64_t seed = 1;

  void validate() const;
};

struct TrainRecord {
  std::size_t step = 0;
  double w1 = 0.0;
  double w2 = 0.0;
  double l1 = 0.0;
  double l2 = 0.0;
  double l3 = 0.0;
  double total = 0.0;
  double acc1 = 0.0;
  double acc2 = 0.0;

  bool operator==(const TrainRecord&) const = default;
};

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& message, TrainRecord record)
      : Error(ErrorCode::kDivergence, message), record_(record) {}
  const TrainRecord& record() const { return record_; }

 private:
  TrainRecord record_;
};

// Piecewise-constant decade decay of the network rate.
double lr_schedule(std::size_t step, const TrainConfig& cfg);

Topology make_topology(const TrainConfig& cfg, const SynthConfig& data);
Strategy make_strategy(const TrainConfig& cfg, std::size_t trunk_dim);

/// What the last step fed to the weight unit.
struct StepInfo {
  Vector z_mean;
  std::optional<WeightTrace> unit_trace;
  Vector unit_losses;  // clamped (and smoothed, if enabled)
  double lr_psi = 0.0;
};

/// Owns Theta, Psi, the center bank and optimizer slots; each step() draws a
/// batch, weights the task losses with the current unit and updates network
/// and unit from the same pre-step state.
class Trainer {
 public:
  // `data` must outlive the trainer.
  Trainer(const Dataset& data, TrainConfig cfg);

  TrainRecord step();
  std::vector<TrainRecord> run(std::size_t steps);

  std::size_t steps_done() const { return step_; }
  const TrainConfig& config() const { return cfg_; }
  const NetworkParams& params() const { return params_; }
  const Strategy& strategy() const { return strategy_; }
  const CenterBank& centers() const { return centers_; }
  const StepInfo& last_step() const { return last_; }

 private:
  std::vector<std::size_t> next_batch();
  void network_step(const Gradients& grads, double lr);

  const Dataset* data_;
  TrainConfig cfg_;
  NetworkParams params_;
  Strategy strategy_;
  CenterBank centers_;
  NetworkParams slots_;
  Rng batch_rng_;
  Rng dropout_rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  std::size_t step_ = 0;
  std::optional<Vector> ema_;
  StepInfo last_;
};

struct TrainResult {
  NetworkParams params;
  Strategy strategy;
  CenterBank centers;
  std::vector<TrainRecord> log;
};

TrainResult train(const Dataset& data, const TrainConfig& cfg);

}  // namespace dmtl
