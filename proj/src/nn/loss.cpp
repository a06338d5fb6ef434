#include "r2ad2/nn/loss.hpp"

#include <algorithm>
#include <cmath>

#include "r2ad2/error.hpp"

namespace r2ad2::nn {

double loss_mse(const Matrix& pred, const Matrix& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw UsageError("mse: shape mismatch");
  if (pred.size() == 0) return 0.0;
  return (pred - target).squaredNorm() / static_cast<double>(pred.size());
}

Matrix loss_mse_grad(const Matrix& pred, const Matrix& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw UsageError("mse: shape mismatch");
  return (pred - target) * (2.0 / static_cast<double>(pred.size()));
}

double loss_bxe(double label, double prob) {
  const double p = std::clamp(prob, kProbClamp, 1.0 - kProbClamp);
  return -label * std::log(p) - (1.0 - label) * std::log(1.0 - p);
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace r2ad2::nn
