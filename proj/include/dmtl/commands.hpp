#pragma once

#include <filesystem>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "dmtl/eval.hpp"
#include "dmtl/run_config.hpp"

namespace dmtl {

/// Held-out metrics of a finished run.
struct RunReport {
  std::string strategy;
  std::size_t steps = 0;
  double final_w1 = 0.0;
  double final_w2 = 0.0;
  VerificationReport verification;
  double identity_accuracy = 0.0;    // branch 1, test split
  double expression_accuracy = 0.0;  // branch 2, test split
  double train_l1 = 0.0;             // full training split
  double train_l2 = 0.0;
};

struct RunOutcome {
  TrainResult result;
  RunReport report;
};

// Generates the configured dataset, trains, and evaluates. Pure: no files.
RunOutcome execute_run(const RunConfig& config);

// Each command validates the config first, then creates `out_dir`. An
// existing non-empty directory is only reused when `force` is set. Every run
// directory receives config.txt, a snapshot that reproduces the run.

// dataset.csv, pairs_val.csv, pairs_test.csv.
void cmd_generate(const RunConfig& config, const std::filesystem::path& out_dir, bool force,
                  std::ostream& out);
// log.csv, report.json, checkpoint.json; diagnostics.json on divergence.
void cmd_train(const RunConfig& config, const std::filesystem::path& out_dir, bool force,
               std::ostream& out);
// sweep.csv: static w1 in {0.0, 0.1, ..., 1.0}, trained concurrently.
void cmd_sweep(const RunConfig& config, const std::filesystem::path& out_dir, bool force,
               std::ostream& out);
// compare.csv (final metrics) and dynamics.csv (per-step weights and losses
// of the naive and proposed runs).
void cmd_compare(const RunConfig& config, const std::filesystem::path& out_dir, bool force,
                 std::ostream& out);

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Gradient checks, oracle agreements and the saturation demo. With
// corrupt_gradient set, the analytic network gradient is perturbed before it
// is checked, so that check must fail.
std::vector<CheckResult> cmd_verify(const RunConfig& config, bool corrupt_gradient);

std::string log_csv(const std::vector<TrainRecord>& log);
std::string report_json(const RunReport& report);

}  // namespace dmtl
