#include "dmtl/dmtl.h"

#include <cstring>
#include <sstream>
#include <string>

#include "dmtl/commands.hpp"
#include "dmtl/error.hpp"
#include "dmtl/run_config.hpp"
#include "dmtl/weight_unit.hpp"

struct dmtl_config {
  dmtl::RunConfig value;
};

struct dmtl_weight_unit {
  dmtl::WeightUnitParams params;
};

namespace {

thread_local std::string last_error;

dmtl_status to_status(dmtl::ErrorCode code) {
  switch (code) {
    case dmtl::ErrorCode::kInvalidArgument: return DMTL_INVALID_ARGUMENT;
    case dmtl::ErrorCode::kShape: return DMTL_SHAPE;
    case dmtl::ErrorCode::kLossFloor: return DMTL_LOSS_FLOOR;
    case dmtl::ErrorCode::kConfig: return DMTL_CONFIG;
    case dmtl::ErrorCode::kIo: return DMTL_IO;
    case dmtl::ErrorCode::kDivergence: return DMTL_DIVERGENCE;
    case dmtl::ErrorCode::kCheckFailed: return DMTL_CHECK_FAILED;
  }
  return DMTL_INTERNAL;
}

dmtl_status failed(dmtl_status status, std::string message) {
  last_error = std::move(message);
  return status;
}

template <class Fn>
dmtl_status guard(Fn&& fn) {
  try {
    fn();
    last_error.clear();
    return DMTL_OK;
  } catch (const dmtl::Error& e) {
    return failed(to_status(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return failed(DMTL_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return failed(DMTL_INTERNAL, e.what());
  } catch (...) {
    return failed(DMTL_INTERNAL, "unknown error");
  }
}

void emit(dmtl_sink sink, void* user, const std::string& text) {
  if (sink != nullptr && !text.empty()) sink(text.c_str(), user);
}

using Command = void (*)(const dmtl::RunConfig&, const std::filesystem::path&, bool,
                         std::ostream&);

dmtl_status run_command(Command cmd, const dmtl_config* config, const char* out_dir, int force,
                        dmtl_sink sink, void* user) {
  if (config == nullptr || out_dir == nullptr) {
    return failed(DMTL_INVALID_ARGUMENT, "config and out_dir must not be NULL");
  }
  std::ostringstream out;
  const dmtl_status status =
      guard([&] { cmd(config->value, std::filesystem::path(out_dir), force != 0, out); });
  emit(sink, user, out.str());
  return status;
}

}  // namespace

extern "C" {

const char* dmtl_last_error(void) { return last_error.c_str(); }

const char* dmtl_status_name(dmtl_status status) {
  switch (status) {
    case DMTL_OK: return "ok";
    case DMTL_INTERNAL: return "internal";
    default: break;
  }
  if (status > DMTL_OK && status < DMTL_INTERNAL) {
    return dmtl::error_code_name(static_cast<dmtl::ErrorCode>(status));
  }
  return "unknown";
}

dmtl_status dmtl_config_create(dmtl_config** out) {
  if (out == nullptr) return failed(DMTL_INVALID_ARGUMENT, "out must not be NULL");
  return guard([&] { *out = new dmtl_config{}; });
}

void dmtl_config_destroy(dmtl_config* config) { delete config; }

dmtl_status dmtl_config_set(dmtl_config* config, const char* key, const char* value) {
  if (config == nullptr || key == nullptr || value == nullptr) {
    return failed(DMTL_INVALID_ARGUMENT, "config, key and value must not be NULL");
  }
  return guard([&] { config->value.set(key, value); });
}

dmtl_status dmtl_config_get(const dmtl_config* config, const char* key, char* buf,
                            size_t buf_size, size_t* needed) {
  if (config == nullptr || key == nullptr) {
    return failed(DMTL_INVALID_ARGUMENT, "config and key must not be NULL");
  }
  std::string value;
  const dmtl_status status = guard([&] { value = config->value.get(key); });
  if (status != DMTL_OK) return status;
  if (needed != nullptr) *needed = value.size() + 1;
  if (buf == nullptr || buf_size < value.size() + 1) {
    return failed(DMTL_INVALID_ARGUMENT, "buffer too small for value of '" + std::string(key) +
                                             "'");
  }
  std::memcpy(buf, value.c_str(), value.size() + 1);
  return DMTL_OK;
}

dmtl_status dmtl_config_load_file(dmtl_config* config, const char* path) {
  if (config == nullptr || path == nullptr) {
    return failed(DMTL_INVALID_ARGUMENT, "config and path must not be NULL");
  }
  return guard([&] { config->value.load_file(path); });
}

dmtl_status dmtl_config_validate(const dmtl_config* config) {
  if (config == nullptr) return failed(DMTL_INVALID_ARGUMENT, "config must not be NULL");
  return guard([&] { config->value.validate(); });
}

dmtl_status dmtl_cmd_generate(const dmtl_config* config, const char* out_dir, int force,
                              dmtl_sink sink, void* user) {
  return run_command(&dmtl::cmd_generate, config, out_dir, force, sink, user);
}

dmtl_status dmtl_cmd_train(const dmtl_config* config, const char* out_dir, int force,
                           dmtl_sink sink, void* user) {
  return run_command(&dmtl::cmd_train, config, out_dir, force, sink, user);
}

dmtl_status dmtl_cmd_sweep(const dmtl_config* config, const char* out_dir, int force,
                           dmtl_sink sink, void* user) {
  return run_command(&dmtl::cmd_sweep, config, out_dir, force, sink, user);
}

dmtl_status dmtl_cmd_compare(const dmtl_config* config, const char* out_dir, int force,
                             dmtl_sink sink, void* user) {
  return run_command(&dmtl::cmd_compare, config, out_dir, force, sink, user);
}

dmtl_status dmtl_cmd_verify(const dmtl_config* config, int corrupt_gradient, dmtl_sink sink,
                            void* user) {
  if (config == nullptr) return failed(DMTL_INVALID_ARGUMENT, "config must not be NULL");
  std::vector<dmtl::CheckResult> results;
  const dmtl_status status =
      guard([&] { results = dmtl::cmd_verify(config->value, corrupt_gradient != 0); });
  if (status != DMTL_OK) return status;
  std::ostringstream out;
  std::size_t n_failed = 0;
  for (const auto& r : results) {
    out << (r.passed ? "PASS  " : "FAIL  ") << r.name << "  (" << r.detail << ")\n";
    if (!r.passed) ++n_failed;
  }
  out << results.size() - n_failed << "/" << results.size() << " checks passed\n";
  emit(sink, user, out.str());
  if (n_failed > 0) {
    return failed(DMTL_CHECK_FAILED, std::to_string(n_failed) + " verification check(s) failed");
  }
  return DMTL_OK;
}

dmtl_status dmtl_weight_unit_create(size_t tasks, size_t dim, int normalize_z,
                                    dmtl_gradient_mode mode, dmtl_weight_unit** out) {
  if (out == nullptr) return failed(DMTL_INVALID_ARGUMENT, "out must not be NULL");
  if (tasks < 2 || dim == 0) {
    return failed(DMTL_INVALID_ARGUMENT, "a weight unit needs at least 2 tasks and dim > 0");
  }
  if (mode != DMTL_GRADIENT_PAPER && mode != DMTL_GRADIENT_FULL) {
    return failed(DMTL_INVALID_ARGUMENT, "unknown gradient mode");
  }
  return guard([&] {
    auto unit = std::make_unique<dmtl_weight_unit>();
    unit->params = dmtl::WeightUnitParams::zeros(tasks, dim);
    unit->params.normalize_z = normalize_z != 0;
    unit->params.gradient_mode = mode == DMTL_GRADIENT_FULL ? dmtl::GradientMode::kFullJacobian
                                                            : dmtl::GradientMode::kPaperDiagonal;
    *out = unit.release();
  });
}

void dmtl_weight_unit_destroy(dmtl_weight_unit* unit) { delete unit; }

dmtl_status dmtl_weight_unit_set_psi(dmtl_weight_unit* unit, const double* psi, size_t count) {
  if (unit == nullptr || psi == nullptr) {
    return failed(DMTL_INVALID_ARGUMENT, "unit and psi must not be NULL");
  }
  if (count != unit->params.psi.size()) return failed(DMTL_SHAPE, "psi has the wrong size");
  std::memcpy(unit->params.psi.data().data(), psi, count * sizeof(double));
  last_error.clear();
  return DMTL_OK;
}

dmtl_status dmtl_weight_unit_get_psi(const dmtl_weight_unit* unit, double* psi, size_t count) {
  if (unit == nullptr || psi == nullptr) {
    return failed(DMTL_INVALID_ARGUMENT, "unit and psi must not be NULL");
  }
  if (count != unit->params.psi.size()) return failed(DMTL_SHAPE, "psi has the wrong size");
  std::memcpy(psi, unit->params.psi.data().data(), count * sizeof(double));
  last_error.clear();
  return DMTL_OK;
}

dmtl_status dmtl_weight_unit_weights(const dmtl_weight_unit* unit, const double* z, size_t dim,
                                     double* w_out, size_t tasks) {
  if (unit == nullptr || z == nullptr || w_out == nullptr) {
    return failed(DMTL_INVALID_ARGUMENT, "unit, z and w_out must not be NULL");
  }
  if (tasks != unit->params.num_tasks()) return failed(DMTL_SHAPE, "wrong number of tasks");
  return guard([&] {
    const dmtl::TaskWeights w = dmtl::compute_weights(unit->params, {z, dim}).w;
    for (std::size_t i = 0; i < tasks; ++i) w_out[i] = w[i];
  });
}

dmtl_status dmtl_weight_unit_step(dmtl_weight_unit* unit, const double* z, size_t dim,
                                  const double* losses, size_t tasks, double eta) {
  if (unit == nullptr || z == nullptr || losses == nullptr) {
    return failed(DMTL_INVALID_ARGUMENT, "unit, z and losses must not be NULL");
  }
  if (tasks != unit->params.num_tasks()) return failed(DMTL_SHAPE, "wrong number of tasks");
  return guard([&] {
    const dmtl::WeightTrace trace = dmtl::compute_weights(unit->params, {z, dim});
    const dmtl::WeightUnitGradient g =
        dmtl::l3_gradient(trace, {losses, tasks}, unit->params.gradient_mode);
    dmtl::apply_gradient(unit->params, g, eta);
  });
}

}  // extern "C"
