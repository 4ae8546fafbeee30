#include <filesystem>
#include <fstream>

#include <doctest.h>

#include "dmtl/checkpoint.hpp"
#include "dmtl/error.hpp"

using namespace dmtl;

TEST_CASE("checkpoint round-trips every tensor exactly") {
  const auto dir = std::filesystem::temp_directory_path() / "dmtl_ckpt_test";
  std::filesystem::create_directories(dir);
  Checkpoint cp;
  cp.network = init_network(Topology{.input_dim = 5, .trunk_widths = {7, 4}, .classes1 = 3,
                                     .classes2 = 2},
                            Rng(4));
  WeightUnitParams unit = WeightUnitParams::zeros(2, 4);
  unit.psi(0, 1) = 0.1 + 0.2;  // not representable in short decimal
  cp.unit = unit;
  cp.centers = Matrix(3, 8, 1.0 / 3.0);
  save_checkpoint(cp, dir / "c.json");
  const Checkpoint back = load_checkpoint(dir / "c.json");
  CHECK(flatten(back.network) == flatten(cp.network));
  CHECK(back.network.shared[0].spec.activation == Activation::kRelu);
  CHECK(back.network.branch1[0].spec.activation == Activation::kIdentity);
  REQUIRE(back.unit.has_value());
  CHECK(back.unit->psi == unit.psi);
  REQUIRE(back.centers.has_value());
  CHECK(*back.centers == *cp.centers);

  Checkpoint lone;
  lone.network = cp.network;
  lone.network.branch2.clear();
  save_checkpoint(lone, dir / "lone.json");
  const Checkpoint lone_back = load_checkpoint(dir / "lone.json");
  CHECK_FALSE(lone_back.network.has_branch2());
  CHECK_FALSE(lone_back.unit.has_value());

  std::ofstream(dir / "bad.json") << "{\"format\": \"other\"}";
  CHECK_THROWS_AS(load_checkpoint(dir / "bad.json"), Error);
  std::filesystem::remove_all(dir);
}
