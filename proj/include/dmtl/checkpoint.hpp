#pragma once

#include <filesystem>
#include <optional>

#include "dmtl/losses.hpp"
#include "dmtl/net.hpp"
#include "dmtl/weight_unit.hpp"

namespace dmtl {

/// Everything a training run learns. Serialized as JSON:
///
///   {"format": "dmtl-checkpoint", "version": 1,
///    "tensors": [{"name": "shared.0.weight", "shape": [32, 16], "data": [...]}, ...]}
///
/// Network tensors are named "<stack>.<layer>.<weight|bias>" with stack in
/// {shared, branch1, branch2}; weights are out x in, row-major. The weight
/// unit adds "unit.psi" (tasks x d_z) and "unit.bias"; the center bank adds
/// "centers" (classes x bottleneck). Doubles are written with round-trip
/// precision.
struct Checkpoint {
  NetworkParams network;
  std::optional<WeightUnitParams> unit;
  std::optional<Matrix> centers;
};

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);

// Layer activations are implied by position: trunk layers ReLU, branch
// layers identity.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace dmtl
