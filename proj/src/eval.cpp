#include "dmtl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dmtl/error.hpp"

namespace dmtl {

double classify_accuracy(const NetworkParams& params, const Dataset& data,
                         std::span<const std::size_t> split, int task) {
  if (split.empty()) fail(ErrorCode::kInvalidArgument, "classify_accuracy: empty split");
  if (task != 1 && task != 2) fail(ErrorCode::kInvalidArgument, "classify_accuracy: task is 1 or 2");
  if ((task == 1 && !params.has_branch1()) || (task == 2 && !params.has_branch2())) {
    return 0.0;
  }
  const ForwardTrace trace = forward(params, data.features(split));
  const Matrix& logits = task == 1 ? trace.logits1() : trace.logits2();
  const std::vector<int> labels = task == 1 ? data.identities(split) : data.expressions(split);
  std::size_t hits = 0;
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const auto row = logits.row(r);
    if (std::max_element(row.begin(), row.end()) - row.begin() == labels[r]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(split.size());
}

double threshold_accuracy(std::span<const double> distances, const std::vector<bool>& same,
                          double threshold) {
  if (distances.size() != same.size() || distances.empty()) {
    fail(ErrorCode::kInvalidArgument, "threshold_accuracy: empty or mismatched inputs");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < distances.size(); ++i) {
    if ((distances[i] <= threshold) == same[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(distances.size());
}

ThresholdChoice select_threshold(std::span<const double> distances, const std::vector<bool>& same) {
  if (distances.size() != same.size() || distances.empty()) {
    fail(ErrorCode::kConfig, "select_threshold: empty or mismatched pair set");
  }
  const std::size_t n = distances.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return distances[a] < distances[b]; });

  // Threshold below everything: all predicted "different".
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) correct += same[i] ? 0 : 1;
  ThresholdChoice best{distances[order.front()] - 1.0, static_cast<double>(correct) / n};

  // Walk the sorted distances; after admitting a whole run of equal values
  // the candidate threshold is the midpoint to the next distinct value.
  std::size_t i = 0;
  while (i < n) {
    const double d = distances[order[i]];
    while (i < n && distances[order[i]] == d) {
      correct += same[order[i]] ? 1 : 0;
      correct -= same[order[i]] ? 0 : 1;
      ++i;
    }
    const double t = i < n ? 0.5 * (d + distances[order[i]]) : d + 1.0;
    const double acc = static_cast<double>(correct) / n;
    if (acc > best.accuracy) best = {t, acc};
  }
  return best;
}

std::vector<double> pair_distances(const NetworkParams& params, const Dataset& data,
                                   const PairSet& pairs, DistanceMetric metric) {
  if (!params.has_branch1()) {
    fail(ErrorCode::kInvalidArgument, "pair_distances: network has no identity branch");
  }
  std::vector<std::size_t> indices;
  indices.reserve(2 * pairs.size());
  for (const Pair& p : pairs) {
    if (p.a >= data.samples.size() || p.b >= data.samples.size()) {
      fail(ErrorCode::kInvalidArgument, "pair_distances: pair index out of range");
    }
    indices.push_back(p.a);
    indices.push_back(p.b);
  }
  const ForwardTrace trace = forward(params, data.features(indices));
  const Matrix& emb = trace.x1();
  std::vector<double> out(pairs.size());
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto a = emb.row(2 * k);
    const auto b = emb.row(2 * k + 1);
    if (metric == DistanceMetric::kEuclidean) {
      double s = 0.0;
      for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
      out[k] = std::sqrt(s);
    } else {
      const double na = norm2(a);
      const double nb = norm2(b);
      out[k] = (na > 0.0 && nb > 0.0) ? 1.0 - dot(a, b) / (na * nb) : 1.0;
    }
  }
  return out;
}

namespace {

std::vector<bool> same_flags(const PairSet& pairs) {
  std::vector<bool> out;
  out.reserve(pairs.size());
  for (const Pair& p : pairs) out.push_back(p.same);
  return out;
}

}  // namespace

VerificationReport verify_pairs(const NetworkParams& params, const Dataset& data,
                                const PairSet& val_pairs, const PairSet& test_pairs,
                                DistanceMetric metric) {
  if (val_pairs.empty() || test_pairs.empty()) {
    fail(ErrorCode::kConfig, "verify_pairs: empty pair set");
  }
  const ThresholdChoice choice =
      select_threshold(pair_distances(params, data, val_pairs, metric), same_flags(val_pairs));
  VerificationReport report;
  report.best_threshold = choice.threshold;
  report.val_accuracy = choice.accuracy;
  report.test_accuracy = threshold_accuracy(pair_distances(params, data, test_pairs, metric),
                                            same_flags(test_pairs), choice.threshold);
  report.n_pairs = val_pairs.size() + test_pairs.size();
  return report;
}

double fd_gradient_check(const ScalarFn& fn, std::span<const double> analytic,
                         std::span<const double> point, double h) {
  if (analytic.size() != point.size()) {
    fail(ErrorCode::kShape, "fd_gradient_check: gradient and point lengths differ");
  }
  Vector x(point.begin(), point.end());
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = fn(x);
    x[i] = saved - h;
    const double down = fn(x);
    x[i] = saved;
    const double fd = (up - down) / (2.0 * h);
    const double err = std::abs(fd - analytic[i]) / std::max(std::abs(analytic[i]), 1e-12);
    worst = std::max(worst, err);
  }
  return worst;
}

TaskWeights one_step_oracle(std::span<const double> losses, std::span<const double> z, double eta) {
  if (losses.size() != 2) fail(ErrorCode::kInvalidArgument, "one_step_oracle: two tasks only");
  if (!(losses[0] > 0.0) || !(losses[1] > 0.0)) {
    fail(ErrorCode::kInvalidArgument, "one_step_oracle: losses must be positive");
  }
  // Zero parameters: a_i = e^0 = 1 for both tasks.
  const double a[2] = {1.0, 1.0};
  const double coupling = a[0] * a[1] / ((a[0] + a[1]) * (a[0] + a[1]));
  double zz = 0.0;
  for (double v : z) zz += v * v;
  // psi_i = -eta (1/L_i) coupling Z, so f_i = psi_i . Z = -eta coupling ZZ^T / L_i.
  const double f1 = -eta * coupling * zz / losses[0];
  const double f2 = -eta * coupling * zz / losses[1];
  // w_1 = 1 / (1 + e^{f2 - f1}).
  const double w1 = 1.0 / (1.0 + std::exp(f2 - f1));
  return TaskWeights({w1, 1.0 - w1});
}

}  // namespace dmtl
