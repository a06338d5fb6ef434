#pragma once

#include <Eigen/Dense>

namespace r2ad2::nn {

// Batches are row-major: one sample per row. Sequence batches stack the time
// steps block-wise, so row s * B + b holds step s of sample b.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;
using MatrixMap = Eigen::Map<Matrix>;
using ConstMatrixMap = Eigen::Map<const Matrix>;
using VectorMap = Eigen::Map<Eigen::VectorXd>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;

}  // namespace r2ad2::nn
