#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "dmtl/numerics.hpp"

namespace dmtl {

/// Two-label factor model: x = identity_scale * mu[id] + expression_scale *
/// nu[expr] + noise * eps.
struct SynthConfig {
  std::size_t n_identities = 20;
  std::size_t n_expressions = 6;
  std::size_t dim = 16;
  std::size_t samples_per_cell = 30;
  double identity_scale = 1.0;
  double expression_scale = 0.5;
  double noise = 0.3;
  std::uint64_t seed = 1;

  void validate() const;
};

struct Sample {
  Vector x;
  int identity = 0;
  int expression = 0;
};

/// Samples are stored train first, then validation, then test, so a split is
/// a contiguous index range and a sample's index is also its row in the
/// dataset file.
struct Dataset {
  SynthConfig config;
  std::vector<Sample> samples;
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;

  Matrix features(std::span<const std::size_t> indices) const;
  std::vector<int> identities(std::span<const std::size_t> indices) const;
  std::vector<int> expressions(std::span<const std::size_t> indices) const;
};

// Per (identity, expression) cell: floor(15%) validation, floor(15%) test, the
// rest train. Throws kConfig if a split would be empty.
Dataset generate(const SynthConfig& cfg);

struct Pair {
  std::size_t a = 0;
  std::size_t b = 0;
  bool same = false;

  bool operator==(const Pair&) const = default;
};

using PairSet = std::vector<Pair>;

// ceil(n/2) same-identity pairs (different expression when the identity has
// more than one in the split) and floor(n/2) different-identity pairs, drawn
// from `split` only.
PairSet sample_pairs(const Dataset& data, std::span<const std::size_t> split, std::size_t n_pairs,
                     std::uint64_t seed);

void write_dataset(const Dataset& data, const std::filesystem::path& path);
Dataset read_dataset(const std::filesystem::path& path);
void write_pairs(const PairSet& pairs, const std::filesystem::path& path);
PairSet read_pairs(const std::filesystem::path& path);

}  // namespace dmtl
