#pragma once

#include "r2ad2/nn/tensor.hpp"

namespace r2ad2::nn {

inline constexpr double kProbClamp = 1e-7;

/// Mean of squared differences over all entries.
double loss_mse(const Matrix& pred, const Matrix& target);
/// d loss_mse / d pred.
Matrix loss_mse_grad(const Matrix& pred, const Matrix& target);

/// -y ln p - (1-y) ln(1-p) with p clamped to [1e-7, 1 - 1e-7].
double loss_bxe(double label, double prob);

double sigmoid(double z);

}  // namespace r2ad2::nn
