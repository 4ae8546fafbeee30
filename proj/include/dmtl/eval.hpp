#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "dmtl/net.hpp"
#include "dmtl/numerics.hpp"
#include "dmtl/synthdata.hpp"
#include "dmtl/task_weights.hpp"

namespace dmtl {

// Argmax-logit accuracy of branch `task` (1 = identity, 2 = expression).
double classify_accuracy(const NetworkParams& params, const Dataset& data,
                         std::span<const std::size_t> split, int task);

enum class DistanceMetric { kEuclidean, kCosine };

struct ThresholdChoice {
  double threshold = 0.0;
  double accuracy = 0.0;
};

// Accuracy of predicting "same" iff distance <= threshold.
double threshold_accuracy(std::span<const double> distances, const std::vector<bool>& same,
                          double threshold);

// Sweeps every midpoint between consecutive distinct sorted distances, plus
// one threshold below and one above the range, and returns the smallest
// threshold reaching the best accuracy.
ThresholdChoice select_threshold(std::span<const double> distances, const std::vector<bool>& same);

// Distances between the branch-1 bottleneck embeddings of each pair.
std::vector<double> pair_distances(const NetworkParams& params, const Dataset& data,
                                   const PairSet& pairs, DistanceMetric metric);

struct VerificationReport {
  double best_threshold = 0.0;
  double val_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::size_t n_pairs = 0;
};

// Threshold is fitted on `val_pairs` alone, then scored on `test_pairs`.
VerificationReport verify_pairs(const NetworkParams& params, const Dataset& data,
                                const PairSet& val_pairs, const PairSet& test_pairs,
                                DistanceMetric metric = DistanceMetric::kEuclidean);

using ScalarFn = std::function<double(std::span<const double>)>;

// Max over coordinates of |fd_i - g_i| / max(|g_i|, 1e-12) with central
// differences of step h.
double fd_gradient_check(const ScalarFn& fn, std::span<const double> analytic,
                         std::span<const double> point, double h = 1e-5);

// Weights after one unit step of rate eta from zero parameters, evaluated
// on the same Z, using the accumulated-parameter closed form.
TaskWeights one_step_oracle(std::span<const double> losses, std::span<const double> z, double eta);

}  // namespace dmtl
