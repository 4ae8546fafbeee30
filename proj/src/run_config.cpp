#include "dmtl/run_config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "dmtl/error.hpp"

namespace dmtl {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const std::string& expected) {
  fail(ErrorCode::kConfig, "config key '" + key + "': invalid value '" + value + "' (expected " +
                               expected + ")");
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) bad_value(key, value, "a number");
    return v;
  } catch (const std::logic_error&) {
    bad_value(key, value, "a number");
  }
}

std::size_t parse_count(const std::string& key, const std::string& value) {
  if (value.empty() || value.find_first_not_of("0123456789") != std::string::npos) {
    bad_value(key, value, "a non-negative integer");
  }
  try {
    return static_cast<std::size_t>(std::stoull(value));
  } catch (const std::logic_error&) {
    bad_value(key, value, "a non-negative integer");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "on" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "off" || value == "no") return false;
  bad_value(key, value, "true or false");
}

std::vector<std::size_t> parse_list(const std::string& key, const std::string& value) {
  std::vector<std::size_t> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_count(key, item));
  }
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_list(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

struct Field {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define DMTL_COUNT(name, member)                                                      \
  {name, {[](RunConfig& c, const std::string& v) { c.member = parse_count(name, v); }, \
          [](const RunConfig& c) { return std::to_string(c.member); }}}
#define DMTL_REAL(name, member)                                                        \
  {name, {[](RunConfig& c, const std::string& v) { c.member = parse_double(name, v); }, \
          [](const RunConfig& c) { return fmt(c.member); }}}
#define DMTL_BOOL(name, member)                                                      \
  {name, {[](RunConfig& c, const std::string& v) { c.member = parse_bool(name, v); }, \
          [](const RunConfig& c) { return std::string(c.member ? "true" : "false"); }}}

}  // namespace

// Defined outside the anonymous namespace so it can reach the private flag.
struct RunConfigFields {
  static const std::map<std::string, Field>& table() {
    static const std::map<std::string, Field> fields = {
        {"seed",
         {[](RunConfig& c, const std::string& v) {
            c.train.seed = parse_count("seed", v);
            c.synth.seed = c.train.seed;
          },
          [](const RunConfig& c) { return std::to_string(c.train.seed); }}},
        {"data_seed",
         {[](RunConfig& c, const std::string& v) { c.synth.seed = parse_count("data_seed", v); },
          [](const RunConfig& c) { return std::to_string(c.synth.seed); }}},
        DMTL_COUNT("n_identities", synth.n_identities),
        DMTL_COUNT("n_expressions", synth.n_expressions),
        DMTL_COUNT("dim", synth.dim),
        DMTL_COUNT("samples_per_cell", synth.samples_per_cell),
        DMTL_REAL("identity_scale", synth.identity_scale),
        DMTL_REAL("expression_scale", synth.expression_scale),
        DMTL_REAL("noise", synth.noise),
        {"strategy",
         {[](RunConfig& c, const std::string& v) {
            if (v == "static") {
              c.train.strategy = StrategyKind::kStatic;
            } else if (v == "single1" || v == "single2") {
              c.train.strategy = StrategyKind::kSingleTask;
              c.train.single_task = v == "single1" ? 1 : 2;
            } else if (v == "naive") {
              c.train.strategy = StrategyKind::kNaiveDynamic;
            } else if (v == "proposed") {
              c.train.strategy = StrategyKind::kProposedDynamic;
            } else {
              bad_value("strategy", v, "static, single1, single2, naive or proposed");
            }
          },
          [](const RunConfig& c) -> std::string {
            if (c.train.strategy == StrategyKind::kSingleTask) {
              return "single" + std::to_string(c.train.single_task);
            }
            return strategy_kind_name(c.train.strategy);
          }}},
        DMTL_REAL("w1", train.static_w1),
        DMTL_COUNT("steps", train.steps),
        DMTL_COUNT("batch_size", train.batch_size),
        {"lr",
         {[](RunConfig& c, const std::string& v) {
            c.train.lr = parse_double("lr", v);
            if (!c.lr_psi_explicit_) c.train.lr_psi = c.train.lr;
          },
          [](const RunConfig& c) { return fmt(c.train.lr); }}},
        {"lr_psi",
         {[](RunConfig& c, const std::string& v) {
            c.train.lr_psi = parse_double("lr_psi", v);
            c.lr_psi_explicit_ = true;
          },
          [](const RunConfig& c) { return fmt(c.train.lr_psi); }}},
        {"lr_milestones",
         {[](RunConfig& c, const std::string& v) {
            c.train.lr_milestones = parse_list("lr_milestones", v);
          },
          [](const RunConfig& c) { return fmt_list(c.train.lr_milestones); }}},
        DMTL_REAL("lr_decay_factor", train.lr_decay_factor),
        {"optimizer",
         {[](RunConfig& c, const std::string& v) {
            if (v == "sgd") {
              c.train.optimizer = OptimizerKind::kSgdMomentum;
            } else if (v == "rmsprop") {
              c.train.optimizer = OptimizerKind::kRmsprop;
            } else {
              bad_value("optimizer", v, "sgd or rmsprop");
            }
          },
          [](const RunConfig& c) {
            return std::string(c.train.optimizer == OptimizerKind::kSgdMomentum ? "sgd"
                                                                                : "rmsprop");
          }}},
        DMTL_REAL("momentum", train.momentum),
        DMTL_REAL("rmsprop_rho", train.rmsprop_rho),
        DMTL_REAL("rmsprop_eps", train.rmsprop_eps),
        DMTL_REAL("weight_decay", train.weight_decay),
        DMTL_REAL("alpha", train.alpha),
        DMTL_REAL("center_rate", train.center_rate),
        {"center_mode",
         {[](RunConfig& c, const std::string& v) {
            if (v == "squared") {
              c.train.center_mode = CenterLossMode::kSquared;
            } else if (v == "literal") {
              c.train.center_mode = CenterLossMode::kLiteral;
            } else {
              bad_value("center_mode", v, "squared or literal");
            }
          },
          [](const RunConfig& c) {
            return std::string(c.train.center_mode == CenterLossMode::kSquared ? "squared"
                                                                               : "literal");
          }}},
        DMTL_REAL("loss_floor", train.loss_floor),
        DMTL_REAL("loss_ema", train.loss_ema),
        DMTL_BOOL("normalize_z", train.normalize_z),
        {"gradient_mode",
         {[](RunConfig& c, const std::string& v) {
            if (v == "paper") {
              c.train.gradient_mode = GradientMode::kPaperDiagonal;
            } else if (v == "full") {
              c.train.gradient_mode = GradientMode::kFullJacobian;
            } else {
              bad_value("gradient_mode", v, "paper or full");
            }
          },
          [](const RunConfig& c) {
            return std::string(c.train.gradient_mode == GradientMode::kPaperDiagonal ? "paper"
                                                                                     : "full");
          }}},
        DMTL_BOOL("learn_bias", train.learn_bias),
        {"trunk_widths",
         {[](RunConfig& c, const std::string& v) {
            c.train.trunk_widths = parse_list("trunk_widths", v);
          },
          [](const RunConfig& c) { return fmt_list(c.train.trunk_widths); }}},
        DMTL_COUNT("bottleneck", train.bottleneck),
        DMTL_REAL("dropout", train.dropout),
        DMTL_COUNT("n_pairs", n_pairs),
        {"metric",
         {[](RunConfig& c, const std::string& v) {
            if (v == "euclidean") {
              c.metric = DistanceMetric::kEuclidean;
            } else if (v == "cosine") {
              c.metric = DistanceMetric::kCosine;
            } else {
              bad_value("metric", v, "euclidean or cosine");
            }
          },
          [](const RunConfig& c) {
            return std::string(c.metric == DistanceMetric::kEuclidean ? "euclidean" : "cosine");
          }}},
    };
    return fields;
  }
};

#undef DMTL_COUNT
#undef DMTL_REAL
#undef DMTL_BOOL

RunConfig::RunConfig() = default;

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto& table = RunConfigFields::table();
  const auto it = table.find(key);
  if (it == table.end()) fail(ErrorCode::kConfig, "unknown config key '" + key + "'");
  it->second.set(*this, trim(value));
}

std::string RunConfig::get(const std::string& key) const {
  const auto& table = RunConfigFields::table();
  const auto it = table.find(key);
  if (it == table.end()) fail(ErrorCode::kConfig, "unknown config key '" + key + "'");
  return it->second.get(*this);
}

void RunConfig::load_text(const std::string& text, const std::string& origin) {
  std::stringstream ss(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      fail(ErrorCode::kConfig,
           origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot read config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  load_text(buf.str(), path.string());
}

void RunConfig::validate() const {
  synth.validate();
  train.validate();
  if (n_pairs < 2) fail(ErrorCode::kConfig, "config key 'n_pairs': need at least 2 pairs");
}

std::string RunConfig::to_text() const {
  // seed first: it also sets the data seed, which data_seed then restores.
  std::string out = "# dmtl run configuration\nseed = " + get("seed") + "\n";
  for (const std::string& key : keys()) {
    if (key != "seed") out += key + " = " + get(key) + "\n";
  }
  return out;
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [key, field] : RunConfigFields::table()) out.push_back(key);
    return out;
  }();
  return names;
}

}  // namespace dmtl
