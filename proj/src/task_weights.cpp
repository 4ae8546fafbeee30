#include "dmtl/task_weights.hpp"

#include <cmath>
#include <sstream>

#include "dmtl/error.hpp"

namespace dmtl {

TaskWeights::TaskWeights(std::vector<double> w) : w_(std::move(w)) {
  if (w_.empty()) fail(ErrorCode::kInvalidArgument, "task weights: empty");
  double total = 0.0;
  for (double v : w_) {
    if (!(v >= 0.0 && v <= 1.0)) {
      fail(ErrorCode::kInvalidArgument, "task weights: entry outside [0, 1]");
    }
    total += v;
  }
  if (std::abs(total - 1.0) > kSimplexTolerance) {
    std::ostringstream os;
    os.precision(17);
    os << "task weights: sum " << total << " is not 1";
    fail(ErrorCode::kInvalidArgument, os.str());
  }
}

TaskWeights TaskWeights::uniform(std::size_t tasks) {
  return TaskWeights(std::vector<double>(tasks, 1.0 / static_cast<double>(tasks)));
}

TaskWeights TaskWeights::one_hot(std::size_t tasks, std::size_t index) {
  std::vector<double> w(tasks, 0.0);
  w.at(index) = 1.0;
  return TaskWeights(std::move(w));
}

double weighted_total(const TaskWeights& w, std::span<const double> losses) {
  if (losses.size() != w.size()) fail(ErrorCode::kShape, "weighted_total: task count mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) total += w[i] * losses[i];
  return total;
}

}  // namespace dmtl
