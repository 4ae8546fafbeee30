#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dmtl/dmtl.h"

namespace {

struct Options {
  std::string config_file;
  std::string out_dir;
  bool force = false;
  std::vector<std::string> overrides;
  std::optional<std::string> seed, strategy, w1, steps, lr, lr_psi, alpha, gradient_mode;
  bool no_normalize_z = false;
  bool corrupt_gradient = false;
};

void print_sink(const char* text, void*) { std::fputs(text, stdout); }

int report(dmtl_status status) {
  if (status == DMTL_OK) return 0;
  std::fprintf(stderr, "dmtl: %s: %s\n", dmtl_status_name(status), dmtl_last_error());
  return static_cast<int>(status);
}

dmtl_status apply_options(dmtl_config* cfg, const Options& o) {
  dmtl_status s = DMTL_OK;
  auto set = [&](const char* key, const std::string& value) {
    if (s == DMTL_OK) s = dmtl_config_set(cfg, key, value.c_str());
  };
  if (!o.config_file.empty()) s = dmtl_config_load_file(cfg, o.config_file.c_str());
  const std::pair<const char*, const std::optional<std::string>*> flags[] = {
      {"seed", &o.seed},   {"strategy", &o.strategy}, {"w1", &o.w1},
      {"steps", &o.steps}, {"lr", &o.lr},             {"lr_psi", &o.lr_psi},
      {"alpha", &o.alpha}, {"gradient_mode", &o.gradient_mode},
  };
  for (const auto& [key, value] : flags) {
    if (value->has_value()) set(key, **value);
  }
  if (o.no_normalize_z) set("normalize_z", "false");
  for (const std::string& kv : o.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "dmtl: --set expects key=value, got '%s'\n", kv.c_str());
      return DMTL_CONFIG;
    }
    set(kv.substr(0, eq).c_str(), kv.substr(eq + 1));
  }
  return s;
}

void add_run_options(CLI::App* cmd, Options& o, bool needs_out) {
  cmd->add_option("-c,--config", o.config_file, "Config file of 'key = value' lines")
      ->check(CLI::ExistingFile);
  if (needs_out) {
    cmd->add_option("-o,--out", o.out_dir, "Output directory")->required();
    cmd->add_flag("--force", o.force, "Write into a non-empty output directory");
  }
  cmd->add_option("--set", o.overrides, "Override any config key (key=value)");
  cmd->add_option("--seed", o.seed, "Seed for data and training");
  cmd->add_option("--strategy", o.strategy, "static, single1, single2, naive or proposed");
  cmd->add_option("--w1", o.w1, "Task 1 weight of the static strategy");
  cmd->add_option("--steps", o.steps, "Training steps");
  cmd->add_option("--lr", o.lr, "Network learning rate");
  cmd->add_option("--lr-psi", o.lr_psi, "Weight-unit learning rate");
  cmd->add_option("--alpha", o.alpha, "Center-loss coefficient");
  cmd->add_flag("--no-normalize-z", o.no_normalize_z, "Feed the raw batch mean to the unit");
  cmd->add_option("--gradient-mode", o.gradient_mode, "paper or full");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic multi-task loss weighting: data, training and experiments"};
  app.require_subcommand(1);
  Options o;

  auto* generate = app.add_subcommand("generate", "Write a synthetic dataset and pair lists");
  auto* train = app.add_subcommand("train", "Train one strategy and write its run directory");
  auto* sweep = app.add_subcommand("sweep", "Train static weightings w1 = 0.0, 0.1, ..., 1.0");
  auto* compare = app.add_subcommand("compare", "Compare static, naive and proposed weighting");
  auto* verify = app.add_subcommand("verify", "Run gradient and oracle checks");
  for (CLI::App* cmd : {generate, train, sweep, compare}) add_run_options(cmd, o, true);
  add_run_options(verify, o, false);
  verify->add_flag("--corrupt-gradient", o.corrupt_gradient,
                   "Perturb the analytic gradient (negative control)");

  CLI11_PARSE(app, argc, argv);

  dmtl_config* cfg = nullptr;
  if (const dmtl_status s = dmtl_config_create(&cfg); s != DMTL_OK) return report(s);
  dmtl_status status = apply_options(cfg, o);
  if (status == DMTL_OK) {
    const char* out = o.out_dir.c_str();
    const int force = o.force ? 1 : 0;
    if (generate->parsed()) {
      status = dmtl_cmd_generate(cfg, out, force, print_sink, nullptr);
    } else if (train->parsed()) {
      status = dmtl_cmd_train(cfg, out, force, print_sink, nullptr);
    } else if (sweep->parsed()) {
      status = dmtl_cmd_sweep(cfg, out, force, print_sink, nullptr);
    } else if (compare->parsed()) {
      status = dmtl_cmd_compare(cfg, out, force, print_sink, nullptr);
    } else {
      status = dmtl_cmd_verify(cfg, o.corrupt_gradient ? 1 : 0, print_sink, nullptr);
    }
  }
  dmtl_config_destroy(cfg);
  return report(status);
}
