#include "dmtl/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dmtl/error.hpp"

namespace dmtl {

namespace {

void check_labels(std::span<const int> labels, std::size_t rows, std::size_t classes,
                  const char* op) {
  if (labels.size() != rows) {
    fail(ErrorCode::kShape, std::string(op) + ": label count does not match batch rows");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      fail(ErrorCode::kInvalidArgument,
           std::string(op) + ": label " + std::to_string(y) + " out of range [0, " +
               std::to_string(classes) + ")");
    }
  }
}

}  // namespace

LossAndGrad cross_entropy(const Matrix& logits, std::span<const int> labels) {
  if (logits.rows() == 0) fail(ErrorCode::kInvalidArgument, "cross_entropy: empty batch");
  check_labels(labels, logits.rows(), logits.cols(), "cross_entropy");
  const double n = static_cast<double>(logits.rows());
  LossAndGrad out{0.0, Matrix(logits.rows(), logits.cols())};
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const auto row = logits.row(r);
    double top = row[0];
    for (double v : row) top = std::max(top, v);
    double total = 0.0;
    for (double v : row) total += std::exp(v - top);
    const double log_total = std::log(total);
    const auto y = static_cast<std::size_t>(labels[r]);
    out.loss += log_total - (row[y] - top);
    auto g = out.grad.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      g[c] = (std::exp(row[c] - top - log_total) - (c == y ? 1.0 : 0.0)) / n;
    }
  }
  out.loss /= n;
  return out;
}

CenterBank CenterBank::zeros(std::size_t classes, std::size_t dim, double rate) {
  return CenterBank{Matrix(classes, dim), rate};
}

LossAndGrad center_loss(const Matrix& x1, std::span<const int> labels, const CenterBank& bank,
                        CenterLossMode mode) {
  if (x1.rows() == 0) fail(ErrorCode::kInvalidArgument, "center_loss: empty batch");
  if (x1.cols() != bank.centers.cols()) {
    fail(ErrorCode::kShape, "center_loss: embedding width does not match centers");
  }
  check_labels(labels, x1.rows(), bank.centers.rows(), "center_loss");
  const double n = static_cast<double>(x1.rows());
  LossAndGrad out{0.0, Matrix(x1.rows(), x1.cols())};
  for (std::size_t r = 0; r < x1.rows(); ++r) {
    const auto x = x1.row(r);
    const auto c = bank.centers.row(static_cast<std::size_t>(labels[r]));
    auto g = out.grad.row(r);
    double sq = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      g[k] = x[k] - c[k];
      sq += g[k] * g[k];
    }
    if (mode == CenterLossMode::kSquared) {
      out.loss += 0.5 * sq;
      for (double& v : g) v /= n;
    } else {
      const double dist = std::sqrt(sq);
      out.loss += dist;
      for (double& v : g) v = dist < 1e-12 ? 0.0 : v / (n * dist);
    }
  }
  out.loss /= n;
  return out;
}

CenterBank update_centers(const CenterBank& bank, const Matrix& x1, std::span<const int> labels) {
  if (x1.cols() != bank.centers.cols()) {
    fail(ErrorCode::kShape, "update_centers: embedding width does not match centers");
  }
  check_labels(labels, x1.rows(), bank.centers.rows(), "update_centers");
  const std::size_t classes = bank.centers.rows();
  Matrix delta(classes, bank.centers.cols());
  std::vector<std::size_t> counts(classes, 0);
  for (std::size_t r = 0; r < x1.rows(); ++r) {
    const auto y = static_cast<std::size_t>(labels[r]);
    ++counts[y];
    const auto x = x1.row(r);
    const auto c = bank.centers.row(y);
    auto d = delta.row(y);
    for (std::size_t k = 0; k < x.size(); ++k) d[k] += c[k] - x[k];
  }
  CenterBank out = bank;
  for (std::size_t y = 0; y < classes; ++y) {
    if (counts[y] == 0) continue;
    auto c = out.centers.row(y);
    const auto d = delta.row(y);
    for (std::size_t k = 0; k < c.size(); ++k) {
      c[k] -= bank.rate * d[k] / static_cast<double>(counts[y]);
    }
  }
  return out;
}

double LossValues::total(const TaskWeights& w) const {
  const double losses[] = {l1, l2};
  return weighted_total(w, losses);
}

TaskLosses task_losses(const ForwardTrace& trace, std::span<const int> labels1,
                       std::span<const int> labels2, const CenterBank& bank, double alpha,
                       CenterLossMode mode) {
  TaskLosses out;
  if (!trace.branch1.empty()) {
    LossAndGrad ce = cross_entropy(trace.logits1(), labels1);
    LossAndGrad center = center_loss(trace.x1(), labels1, bank, mode);
    out.values.ls1 = ce.loss;
    out.values.lc = center.loss;
    out.values.l1 = ce.loss + alpha * center.loss;
    out.grad_logits1 = std::move(ce.grad);
    out.grad_x1 = scale(center.grad, alpha);
  }
  if (!trace.branch2.empty()) {
    LossAndGrad ce = cross_entropy(trace.logits2(), labels2);
    out.values.l2 = ce.loss;
    out.grad_logits2 = std::move(ce.grad);
  }
  return out;
}

}  // namespace dmtl
