#include "dmtl/trainer.hpp"

#include <cmath>
#include <algorithm>
#include <array>
#include <sstream>

namespace dmtl {

namespace {

double decay_multiplier(std::size_t step, const TrainConfig& cfg) {
  double m = 1.0;
  for (std::size_t milestone : cfg.lr_milestones) {
    if (step >= milestone) m *= cfg.lr_decay_factor;
  }
  return m;
}

double batch_accuracy(const Matrix& logits, std::span<const int> labels) {
  std::size_t hits = 0;
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const auto row = logits.row(r);
    const auto best = std::max_element(row.begin(), row.end()) - row.begin();
    if (best == labels[r]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(logits.rows());
}

template <typename Fn>
void zip_arrays(NetworkParams& params, const Gradients& grads, NetworkParams& slots, Fn fn) {
  auto stacks = [](auto& p) { return std::array{&p.shared, &p.branch1, &p.branch2}; };
  const auto ps = stacks(params);
  const auto gs = stacks(grads);
  const auto ss = stacks(slots);
  for (std::size_t s = 0; s < 3; ++s) {
    for (std::size_t l = 0; l < ps[s]->size(); ++l) {
      Layer& p = (*ps[s])[l];
      const Layer& g = (*gs[s])[l];
      Layer& slot = (*ss[s])[l];
      fn(p.weight.data(), g.weight.data(), slot.weight.data(), true);
      fn(std::span(p.bias), std::span<const double>(g.bias), std::span(slot.bias), false);
    }
  }
}

}  // namespace

void TrainConfig::validate() const {
  auto bad = [](const std::string& what) { fail(ErrorCode::kConfig, "train config: " + what); };
  if (!(lr >= 0.0 && lr <= 1.0)) bad("lr must be in [0, 1]");
  if (!(lr_psi >= 0.0 && lr_psi <= 1.0)) bad("lr_psi must be in [0, 1]");
  if (!(lr_decay_factor > 0.0 && lr_decay_factor <= 1.0)) bad("lr_decay_factor must be in (0, 1]");
  if (!(momentum >= 0.0 && momentum < 1.0)) bad("momentum must be in [0, 1)");
  if (!(rmsprop_rho > 0.0 && rmsprop_rho < 1.0)) bad("rmsprop_rho must be in (0, 1)");
  if (!(rmsprop_eps > 0.0)) bad("rmsprop_eps must be > 0");
  if (!(weight_decay >= 0.0)) bad("weight_decay must be >= 0");
  if (batch_size < 1) bad("batch_size must be >= 1");
  if (!(alpha >= 0.0)) bad("alpha must be >= 0");
  if (!(center_rate > 0.0 && center_rate <= 1.0)) bad("center_rate must be in (0, 1]");
  if (!(loss_floor > 0.0)) bad("loss_floor must be > 0");
  if (!(loss_ema >= 0.0 && loss_ema < 1.0)) bad("loss_ema must be in [0, 1)");
  if (!(static_w1 >= 0.0 && static_w1 <= 1.0)) bad("w1 must be in [0, 1]");
  if (single_task != 1 && single_task != 2) bad("single_task must be 1 or 2");
  if (!(dropout >= 0.0 && dropout < 1.0)) bad("dropout must be in [0, 1)");
  if (bottleneck < 1 || trunk_widths.empty()) bad("network dimensions must be >= 1");
  if (!has_branch1 && !has_branch2) bad("at least one branch is required");
  if (strategy == StrategyKind::kNaiveDynamic || strategy == StrategyKind::kProposedDynamic) {
    if (!has_branch1 || !has_branch2) bad("dynamic strategies need both branches");
  }
}

double lr_schedule(std::size_t step, const TrainConfig& cfg) {
  return cfg.lr * decay_multiplier(step, cfg);
}

Topology make_topology(const TrainConfig& cfg, const SynthConfig& data) {
  Topology t;
  t.input_dim = data.dim;
  t.trunk_widths = cfg.trunk_widths;
  t.bottleneck1 = cfg.bottleneck;
  t.bottleneck2 = cfg.bottleneck;
  t.classes1 = data.n_identities;
  t.classes2 = data.n_expressions;
  t.has_branch1 = cfg.has_branch1;
  t.has_branch2 = cfg.has_branch2;
  return t;
}

Strategy make_strategy(const TrainConfig& cfg, std::size_t trunk_dim) {
  switch (cfg.strategy) {
    case StrategyKind::kStatic:
      return Strategy::fixed(TaskWeights({cfg.static_w1, 1.0 - cfg.static_w1}));
    case StrategyKind::kSingleTask:
      return Strategy::single_task(cfg.single_task);
    case StrategyKind::kNaiveDynamic:
    case StrategyKind::kProposedDynamic: {
      WeightUnitParams unit = WeightUnitParams::zeros(2, trunk_dim);
      unit.normalize_z = cfg.normalize_z;
      unit.gradient_mode = cfg.gradient_mode;
      unit.learn_bias = cfg.learn_bias;
      return cfg.strategy == StrategyKind::kNaiveDynamic ? Strategy::naive(std::move(unit))
                                                         : Strategy::proposed(std::move(unit));
    }
  }
  fail(ErrorCode::kConfig, "unknown strategy");
}

Trainer::Trainer(const Dataset& data, TrainConfig cfg)
    : data_(&data),
      cfg_(std::move(cfg)),
      batch_rng_(Rng(cfg_.seed).split(3)),
      dropout_rng_(Rng(cfg_.seed).split(4)) {
  cfg_.validate();
  if (data.train.empty()) fail(ErrorCode::kConfig, "trainer: empty training split");
  const Topology topology = make_topology(cfg_, data.config);
  params_ = init_network(topology, Rng(cfg_.seed));
  strategy_ = make_strategy(cfg_, topology.trunk_dim());
  if (cfg_.has_branch1) {
    centers_ = CenterBank::zeros(topology.classes1, topology.bottleneck1, cfg_.center_rate);
  }
  slots_ = zeros_like(params_);
  order_ = data.train;
}

std::vector<std::size_t> Trainer::next_batch() {
  std::vector<std::size_t> batch;
  batch.reserve(cfg_.batch_size);
  while (batch.size() < cfg_.batch_size) {
    if (cursor_ == 0) batch_rng_.shuffle(order_);
    batch.push_back(order_[cursor_]);
    cursor_ = (cursor_ + 1) % order_.size();
  }
  return batch;
}

void Trainer::network_step(const Gradients& grads, double lr) {
  const double wd = cfg_.weight_decay;
  if (cfg_.optimizer == OptimizerKind::kSgdMomentum) {
    const double mu = cfg_.momentum;
    zip_arrays(params_, grads, slots_,
               [&](std::span<double> p, std::span<const double> g, std::span<double> v,
                   bool decays) {
                 for (std::size_t i = 0; i < p.size(); ++i) {
                   const double gi = decays ? g[i] + wd * p[i] : g[i];
                   v[i] = mu * v[i] + gi;
                   p[i] -= lr * v[i];
                 }
               });
  } else {
    const double rho = cfg_.rmsprop_rho;
    const double eps = cfg_.rmsprop_eps;
    zip_arrays(params_, grads, slots_,
               [&](std::span<double> p, std::span<const double> g, std::span<double> s,
                   bool decays) {
                 for (std::size_t i = 0; i < p.size(); ++i) {
                   const double gi = decays ? g[i] + wd * p[i] : g[i];
                   s[i] = rho * s[i] + (1.0 - rho) * gi * gi;
                   p[i] -= lr * gi / (std::sqrt(s[i]) + eps);
                 }
               });
  }
}

TrainRecord Trainer::step() {
  const double multiplier = decay_multiplier(step_, cfg_);
  const double lr = cfg_.lr * multiplier;
  const double lr_psi = cfg_.lr_psi * multiplier;

  const std::vector<std::size_t> batch = next_batch();
  const Matrix x = data_->features(batch);
  const std::vector<int> ids = data_->identities(batch);
  const std::vector<int> exprs = data_->expressions(batch);

  const ForwardTrace trace = forward_train(params_, x, cfg_.dropout, dropout_rng_);
  Strategy::StepWeights sw = strategy_.weights_for_step(trace.z());
  const TaskLosses tl =
      task_losses(trace, cfg_.has_branch1 ? std::span<const int>(ids) : std::span<const int>(),
                  cfg_.has_branch2 ? std::span<const int>(exprs) : std::span<const int>(),
                  centers_, cfg_.alpha, cfg_.center_mode);

  TrainRecord rec;
  rec.step = step_;
  rec.w1 = sw.w[0];
  rec.w2 = sw.w[1];
  rec.l1 = tl.values.l1;
  rec.l2 = tl.values.l2;
  rec.total = tl.values.total(sw.w);
  if (cfg_.has_branch1) rec.acc1 = batch_accuracy(trace.logits1(), ids);
  if (cfg_.has_branch2) rec.acc2 = batch_accuracy(trace.logits2(), exprs);
  if (!std::isfinite(rec.l1) || !std::isfinite(rec.l2)) {
    rec.l3 = std::nan("");
    std::ostringstream os;
    os << "non-finite task loss at step " << step_ << " (L1=" << rec.l1 << ", L2=" << rec.l2
       << ")";
    throw DivergenceError(os.str(), rec);
  }

  const double raw[] = {tl.values.l1, tl.values.l2};
  Vector unit_losses = clamp_losses(raw, cfg_.loss_floor);
  if (cfg_.loss_ema > 0.0) {
    if (!ema_) {
      ema_ = unit_losses;
    } else {
      for (std::size_t i = 0; i < unit_losses.size(); ++i) {
        (*ema_)[i] = cfg_.loss_ema * (*ema_)[i] + (1.0 - cfg_.loss_ema) * unit_losses[i];
      }
    }
    unit_losses = clamp_losses(*ema_, cfg_.loss_floor);
  }
  rec.l3 = l3_loss(sw.w, unit_losses, cfg_.loss_floor);

  const Gradients grads = backward(params_, trace, tl.grad_logits1, tl.grad_logits2,
                                   tl.grad_x1, sw.w);

  auto unit_step = [&] {
    if (sw.trace) {
      strategy_ = update_strategy(strategy_, *sw.trace, unit_losses, lr_psi, cfg_.loss_floor);
    }
  };
  if (cfg_.psi_step_first) {
    unit_step();
    network_step(grads, lr);
  } else {
    network_step(grads, lr);
    unit_step();
  }
  if (cfg_.has_branch1) centers_ = update_centers(centers_, trace.x1(), ids);

  last_.z_mean = column_mean(trace.z());
  last_.unit_trace = sw.trace;
  last_.unit_losses = unit_losses;
  last_.lr_psi = lr_psi;
  ++step_;
  return rec;
}

std::vector<TrainRecord> Trainer::run(std::size_t steps) {
  std::vector<TrainRecord> log;
  log.reserve(steps);
  for (std::size_t i = 0; i < steps; ++i) log.push_back(step());
  return log;
}

TrainResult train(const Dataset& data, const TrainConfig& cfg) {
  Trainer trainer(data, cfg);
  TrainResult result;
  result.log = trainer.run(cfg.steps);
  result.params = trainer.params();
  result.strategy = trainer.strategy();
  result.centers = trainer.centers();
  return result;
}

}  // namespace dmtl
