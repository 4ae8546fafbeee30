#include <cmath>
#include <cstring>
#include <filesystem>
#include <string>

#include <doctest.h>

#include "dmtl/dmtl.h"

namespace {

void collect(const char* text, void* user) { *static_cast<std::string*>(user) += text; }

struct ConfigHandle {
  ConfigHandle() { REQUIRE(dmtl_config_create(&ptr) == DMTL_OK); }
  ~ConfigHandle() { dmtl_config_destroy(ptr); }
  dmtl_config* ptr = nullptr;
};

}  // namespace

TEST_CASE("config handle set/get and errors") {
  ConfigHandle cfg;
  CHECK(dmtl_config_set(cfg.ptr, "steps", "25") == DMTL_OK);
  CHECK(std::string(dmtl_last_error()).empty());
  char buf[64];
  size_t needed = 0;
  CHECK(dmtl_config_get(cfg.ptr, "steps", buf, sizeof buf, &needed) == DMTL_OK);
  CHECK(std::string(buf) == "25");
  CHECK(needed == 3);
  CHECK(dmtl_config_get(cfg.ptr, "steps", buf, 2, &needed) == DMTL_INVALID_ARGUMENT);

  CHECK(dmtl_config_set(cfg.ptr, "bogus_key", "1") == DMTL_CONFIG);
  CHECK(std::string(dmtl_last_error()).find("bogus_key") != std::string::npos);
  CHECK(std::string(dmtl_status_name(DMTL_CONFIG)) == "config error");
  CHECK(dmtl_config_set(nullptr, "steps", "1") == DMTL_INVALID_ARGUMENT);
  CHECK(dmtl_config_load_file(cfg.ptr, "/nonexistent/x.cfg") == DMTL_IO);

  CHECK(dmtl_config_set(cfg.ptr, "w1", "2") == DMTL_OK);
  CHECK(dmtl_config_validate(cfg.ptr) == DMTL_CONFIG);
}

TEST_CASE("weight unit handle reproduces the one-step ratio") {
  dmtl_weight_unit* unit = nullptr;
  REQUIRE(dmtl_weight_unit_create(2, 3, 1, DMTL_GRADIENT_PAPER, &unit) == DMTL_OK);
  const double z[] = {0.0, 2.0, 0.0};
  const double losses[] = {2.0, 1.0};
  double w[2];
  CHECK(dmtl_weight_unit_weights(unit, z, 3, w, 2) == DMTL_OK);
  CHECK(w[0] == 0.5);
  CHECK(dmtl_weight_unit_step(unit, z, 3, losses, 2, 1.0) == DMTL_OK);
  CHECK(dmtl_weight_unit_weights(unit, z, 3, w, 2) == DMTL_OK);
  CHECK(w[0] / w[1] == doctest::Approx(std::exp(0.125)).epsilon(1e-14));

  double psi[6];
  CHECK(dmtl_weight_unit_get_psi(unit, psi, 6) == DMTL_OK);
  CHECK(psi[1] == doctest::Approx(-0.125));
  CHECK(dmtl_weight_unit_set_psi(unit, psi, 5) == DMTL_SHAPE);
  CHECK(dmtl_weight_unit_weights(unit, z, 2, w, 2) == DMTL_SHAPE);
  const double bad[] = {0.0, 1.0};
  CHECK(dmtl_weight_unit_step(unit, z, 3, bad, 2, 1.0) == DMTL_LOSS_FLOOR);
  dmtl_weight_unit_destroy(unit);
  CHECK(dmtl_weight_unit_create(1, 3, 1, DMTL_GRADIENT_PAPER, &unit) == DMTL_INVALID_ARGUMENT);
}

TEST_CASE("train command through the C interface") {
  const auto dir = std::filesystem::temp_directory_path() / "dmtl_capi_train";
  std::filesystem::remove_all(dir);
  ConfigHandle cfg;
  REQUIRE(dmtl_config_set(cfg.ptr, "steps", "5") == DMTL_OK);
  std::string out;
  CHECK(dmtl_cmd_train(cfg.ptr, dir.c_str(), 0, collect, &out) == DMTL_OK);
  CHECK(out.find("5 steps") != std::string::npos);
  CHECK(std::filesystem::exists(dir / "log.csv"));
  CHECK(std::filesystem::exists(dir / "checkpoint.json"));
  CHECK(dmtl_cmd_train(cfg.ptr, dir.c_str(), 0, nullptr, nullptr) == DMTL_IO);
  CHECK(dmtl_cmd_train(cfg.ptr, dir.c_str(), 1, nullptr, nullptr) == DMTL_OK);
  std::filesystem::remove_all(dir);
}

TEST_CASE("verify command passes and the corrupted gradient fails") {
  ConfigHandle cfg;
  std::string out;
  CHECK(dmtl_cmd_verify(cfg.ptr, 0, collect, &out) == DMTL_OK);
  CHECK(out.find("FAIL") == std::string::npos);
  CHECK(out.find("unnormalized") != std::string::npos);
  out.clear();
  CHECK(dmtl_cmd_verify(cfg.ptr, 1, collect, &out) == DMTL_CHECK_FAILED);
  CHECK(out.find("FAIL  network total-loss gradient") != std::string::npos);
}
