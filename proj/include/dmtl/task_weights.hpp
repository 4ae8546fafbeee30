#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace dmtl {

inline constexpr double kSimplexTolerance = 1e-12;

/// Per-task loss weights on the closed probability simplex.
class TaskWeights {
 public:
  TaskWeights() = default;
  // Throws kInvalidArgument unless every entry is in [0, 1] and the entries
  // sum to 1 within kSimplexTolerance.
  explicit TaskWeights(std::vector<double> w);

  static TaskWeights uniform(std::size_t tasks);
  static TaskWeights one_hot(std::size_t tasks, std::size_t index);

  std::size_t size() const { return w_.size(); }
  double operator[](std::size_t i) const { return w_[i]; }
  std::span<const double> values() const { return w_; }

  bool operator==(const TaskWeights& other) const = default;

 private:
  std::vector<double> w_;
};

// sum_i w_i * L_i.
double weighted_total(const TaskWeights& w, std::span<const double> losses);

}  // namespace dmtl
