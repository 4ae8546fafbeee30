#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "dmtl/eval.hpp"
#include "dmtl/synthdata.hpp"
#include "dmtl/trainer.hpp"

namespace dmtl {

/// Union of data, training and evaluation settings for one invocation.
///
/// Text form is one `key = value` per line; '#' starts a comment. Unknown
/// keys and malformed values raise kConfig naming the key. `seed` seeds both
/// data and training; `data_seed` overrides the data seed alone. `lr_psi`
/// follows `lr` until it is set explicitly.
class RunConfig {
 public:
  RunConfig();

  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  void load_file(const std::filesystem::path& path);
  void load_text(const std::string& text, const std::string& origin = "<text>");
  void validate() const;

  // Snapshot that load_text() reads back to an identical config.
  std::string to_text() const;

  static const std::vector<std::string>& keys();

  SynthConfig synth;
  TrainConfig train;
  std::size_t n_pairs = 1000;
  DistanceMetric metric = DistanceMetric::kEuclidean;

 private:
  friend struct RunConfigFields;
  bool lr_psi_explicit_ = false;
};

}  // namespace dmtl
