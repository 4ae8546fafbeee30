#include "dmtl/commands.hpp"

#include <cstdio>
#include <fstream>
#include <future>
#include <sstream>

#include <json.hpp>

#include "dmtl/checkpoint.hpp"
#include "dmtl/error.hpp"

namespace dmtl {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::uint64_t pair_seed(std::uint64_t data_seed, std::uint64_t which) {
  return splitmix64(data_seed ^ splitmix64(0x7061697273ULL + which));
}

struct PairSplits {
  PairSet val;
  PairSet test;
};

PairSplits make_pairs(const Dataset& data, std::size_t n_pairs) {
  return {sample_pairs(data, data.val, n_pairs, pair_seed(data.config.seed, 0)),
          sample_pairs(data, data.test, n_pairs, pair_seed(data.config.seed, 1))};
}

void prepare_out_dir(const std::filesystem::path& dir, bool force) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (fs::exists(dir, ec)) {
    if (!fs::is_directory(dir, ec)) {
      fail(ErrorCode::kIo, dir.string() + " exists and is not a directory");
    }
    if (!fs::is_empty(dir, ec) && !force) {
      fail(ErrorCode::kIo, dir.string() + " is not empty; pass --force to overwrite");
    }
  }
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    fail(ErrorCode::kIo, "cannot create output directory " + dir.string() +
                             (ec ? ": " + ec.message() : ""));
  }
  const fs::path probe = dir / ".dmtl-write-test";
  {
    std::ofstream out(probe);
    if (!out) fail(ErrorCode::kIo, "output directory " + dir.string() + " is not writable");
  }
  fs::remove(probe, ec);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorCode::kIo, "write failed for " + path.string());
}

RunReport evaluate(const RunConfig& config, const Dataset& data, const PairSplits& pairs,
                   const TrainResult& result) {
  RunReport r;
  r.strategy = config.get("strategy");
  r.steps = result.log.size();
  if (!result.log.empty()) {
    r.final_w1 = result.log.back().w1;
    r.final_w2 = result.log.back().w2;
  }
  const NetworkParams& net = result.params;
  if (net.has_branch1()) {
    r.verification = verify_pairs(net, data, pairs.val, pairs.test, config.metric);
    r.identity_accuracy = classify_accuracy(net, data, data.test, 1);
  }
  if (net.has_branch2()) r.expression_accuracy = classify_accuracy(net, data, data.test, 2);

  const ForwardTrace trace = forward(net, data.features(data.train));
  const std::vector<int> ids = data.identities(data.train);
  const std::vector<int> exprs = data.expressions(data.train);
  const TaskLosses tl = task_losses(
      trace, net.has_branch1() ? std::span<const int>(ids) : std::span<const int>(),
      net.has_branch2() ? std::span<const int>(exprs) : std::span<const int>(), result.centers,
      config.train.alpha, config.train.center_mode);
  r.train_l1 = tl.values.l1;
  r.train_l2 = tl.values.l2;
  return r;
}

Checkpoint make_checkpoint(const TrainResult& result) {
  Checkpoint cp;
  cp.network = result.params;
  if (result.strategy.is_dynamic()) cp.unit = result.strategy.unit();
  if (result.params.has_branch1()) cp.centers = result.centers.centers;
  return cp;
}

RunConfig with_strategy(const RunConfig& base, const std::string& strategy) {
  RunConfig c = base;
  c.set("strategy", strategy);
  return c;
}

}  // namespace

std::string log_csv(const std::vector<TrainRecord>& log) {
  std::string out = "step,w1,w2,L1,L2,L3,total,acc1,acc2\n";
  for (const TrainRecord& r : log) {
    out += std::to_string(r.step) + "," + fmt(r.w1) + "," + fmt(r.w2) + "," + fmt(r.l1) + "," +
           fmt(r.l2) + "," + fmt(r.l3) + "," + fmt(r.total) + "," + fmt(r.acc1) + "," +
           fmt(r.acc2) + "\n";
  }
  return out;
}

std::string report_json(const RunReport& r) {
  const nlohmann::json doc{
      {"strategy", r.strategy},
      {"steps", r.steps},
      {"final_weights", {r.final_w1, r.final_w2}},
      {"verification",
       {{"best_threshold", r.verification.best_threshold},
        {"val_accuracy", r.verification.val_accuracy},
        {"test_accuracy", r.verification.test_accuracy},
        {"n_pairs", r.verification.n_pairs}}},
      {"identity_accuracy", r.identity_accuracy},
      {"expression_accuracy", r.expression_accuracy},
      {"train_loss", {{"L1", r.train_l1}, {"L2", r.train_l2}}},
  };
  return doc.dump(2) + "\n";
}

RunOutcome execute_run(const RunConfig& config) {
  config.validate();
  const Dataset data = generate(config.synth);
  const PairSplits pairs = make_pairs(data, config.n_pairs);
  RunOutcome outcome;
  outcome.result = train(data, config.train);
  outcome.report = evaluate(config, data, pairs, outcome.result);
  return outcome;
}

void cmd_generate(const RunConfig& config, const std::filesystem::path& out_dir, bool force,
                  std::ostream& out) {
  config.validate();
  prepare_out_dir(out_dir, force);
  const Dataset data = generate(config.synth);
  const PairSplits pairs = make_pairs(data, config.n_pairs);
  write_text(out_dir / "config.txt", config.to_text());
  write_dataset(data, out_dir / "dataset.csv");
  write_pairs(pairs.val, out_dir / "pairs_val.csv");
  write_pairs(pairs.test, out_dir / "pairs_test.csv");

  const SynthConfig& c = data.config;
  out << "samples: " << data.samples.size() << " (train " << data.train.size() << ", val "
      << data.val.size() << ", test " << data.test.size() << ")\n"
      << "cells: " << c.n_identities << " identities x " << c.n_expressions
      << " expressions, " << c.samples_per_cell << " samples per cell\n"
      << "pairs: " << pairs.val.size() << " validation, " << pairs.test.size() << " test\n";
}

void cmd_train(const RunConfig& config, const std::filesystem::path& out_dir, bool force,
               std::ostream& out) {
  config.validate();
  prepare_out_dir(out_dir, force);
  write_text(out_dir / "config.txt", config.to_text());
  const Dataset data = generate(config.synth);
  const PairSplits pairs = make_pairs(data, config.n_pairs);

  Trainer trainer(data, config.train);
  TrainResult result;
  try {
    for (std::size_t i = 0; i < config.train.steps; ++i) result.log.push_back(trainer.step());
  } catch (const DivergenceError& e) {
    const TrainRecord& r = e.record();
    const nlohmann::json diag{{"error", e.what()}, {"step", r.step}, {"w1", r.w1},
                              {"w2", r.w2},        {"L1", fmt(r.l1)}, {"L2", fmt(r.l2)}};
    write_text(out_dir / "diagnostics.json", diag.dump(2) + "\n");
    write_text(out_dir / "log.csv", log_csv(result.log));
    throw;
  }
  result.params = trainer.params();
  result.strategy = trainer.strategy();
  result.centers = trainer.centers();

  const RunReport report = evaluate(config, data, pairs, result);
  write_text(out_dir / "log.csv", log_csv(result.log));
  write_text(out_dir / "report.json", report_json(report));
  save_checkpoint(make_checkpoint(result), out_dir / "checkpoint.json");

  out << "strategy " << report.strategy << ", " << report.steps << " steps\n"
      << "final weights: w1=" << report.final_w1 << " w2=" << report.final_w2 << "\n"
      << "verification test accuracy: " << report.verification.test_accuracy << "\n"
      << "expression test accuracy: " << report.expression_accuracy << "\n";
}

void cmd_sweep(const RunConfig& config, const std::filesystem::path& out_dir, bool force,
               std::ostream& out) {
  config.validate();
  prepare_out_dir(out_dir, force);
  write_text(out_dir / "config.txt", config.to_text());

  std::vector<std::future<RunReport>> jobs;
  for (int k = 0; k <= 10; ++k) {
    RunConfig c = with_strategy(config, "static");
    c.train.static_w1 = k / 10.0;
    jobs.push_back(std::async(std::launch::async, [c] { return execute_run(c).report; }));
  }
  std::string csv =
      "w1,w2,verification_accuracy,expression_accuracy,identity_accuracy,train_L1,train_L2\n";
  for (int k = 0; k <= 10; ++k) {
    const RunReport r = jobs[static_cast<std::size_t>(k)].get();
    const double w1 = k / 10.0;
    csv += fmt(w1) + "," + fmt(1.0 - w1) + "," + fmt(r.verification.test_accuracy) + "," +
           fmt(r.expression_accuracy) + "," + fmt(r.identity_accuracy) + "," + fmt(r.train_l1) +
           "," + fmt(r.train_l2) + "\n";
    out << "w1=" << w1 << "  verification=" << r.verification.test_accuracy
        << "  expression=" << r.expression_accuracy << "\n";
  }
  write_text(out_dir / "sweep.csv", csv);
}

void cmd_compare(const RunConfig& config, const std::filesystem::path& out_dir, bool force,
                 std::ostream& out) {
  config.validate();
  prepare_out_dir(out_dir, force);
  write_text(out_dir / "config.txt", config.to_text());

  RunConfig fixed = with_strategy(config, "static");
  fixed.train.static_w1 = 0.5;
  const std::vector<std::pair<std::string, RunConfig>> runs = {
      {"static", fixed},
      {"naive", with_strategy(config, "naive")},
      {"proposed", with_strategy(config, "proposed")},
  };
  std::string compare =
      "strategy,verification_accuracy,expression_accuracy,identity_accuracy,train_L1,train_L2\n";
  std::string dynamics = "strategy,step,w1,w2,L1,L2\n";
  for (const auto& [name, c] : runs) {
    const RunOutcome o = execute_run(c);
    const RunReport& r = o.report;
    compare += name + "," + fmt(r.verification.test_accuracy) + "," +
               fmt(r.expression_accuracy) + "," + fmt(r.identity_accuracy) + "," +
               fmt(r.train_l1) + "," + fmt(r.train_l2) + "\n";
    if (name != "static") {
      for (const TrainRecord& rec : o.result.log) {
        dynamics += name + "," + std::to_string(rec.step) + "," + fmt(rec.w1) + "," +
                    fmt(rec.w2) + "," + fmt(rec.l1) + "," + fmt(rec.l2) + "\n";
      }
    }
    out << name << ": verification=" << r.verification.test_accuracy
        << " expression=" << r.expression_accuracy << " train L1=" << r.train_l1
        << " L2=" << r.train_l2 << "\n";
  }
  write_text(out_dir / "compare.csv", compare);
  write_text(out_dir / "dynamics.csv", dynamics);
}

}  // namespace dmtl
