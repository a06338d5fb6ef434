#pragma once

#include <span>
#include <vector>

#include "r2ad2/nn/params.hpp"
#include "r2ad2/nn/tensor.hpp"

namespace r2ad2::nn {

enum class Mode { Train, Infer };

double activate(Activation a, double z);
/// Derivative expressed through the activation output y = activate(a, z).
double activation_slope(Activation a, double y);

// ---------------------------------------------------------------- dense

struct DenseView {
  ConstMatrixMap weight;  // [out x in]
  ConstVectorMap bias;    // [out]
  Activation activation;
};

/// y = act(x W^T + b) for every row of x.
Matrix dense_forward(const DenseView& layer, const Matrix& x);

/// grad_y is w.r.t. the layer output. Accumulates into grad_weight and
/// grad_bias; writes the input gradient when grad_x is non-null.
void dense_backward(const DenseView& layer, const Matrix& x, const Matrix& y,
                    const Matrix& grad_y, std::span<double> grad_weight,
                    std::span<double> grad_bias, Matrix* grad_x);

// ----------------------------------------------------------------- lstm

struct LstmView {
  ConstMatrixMap w_input;      // [4H x in]
  ConstMatrixMap w_recurrent;  // [4H x H]
  ConstVectorMap bias;         // [4H]
  int hidden() const { return static_cast<int>(w_recurrent.cols()); }
};

struct LstmCache {
  int steps = 0;
  Matrix gates;      // [S*B x 4H] after sigmoid/tanh, order i f g o
  Matrix cell;       // [S*B x H]
  Matrix cell_tanh;  // [S*B x H]
  Matrix hidden;     // [S*B x H]
};

struct LstmOutput {
  Matrix hidden;        // [S*B x H], step-major
  Matrix final_hidden;  // [B x H]
  Matrix final_cell;    // [B x H]
};

/// Runs the recurrence over `steps` time steps starting from zero state.
/// x is [S*B x in], step-major.
LstmOutput lstm_forward(const LstmView& cell, const Matrix& x, int steps,
                        LstmCache* cache = nullptr);

/// grad_hidden is w.r.t. every hidden output [S*B x H].
void lstm_backward(const LstmView& cell, const Matrix& x, const LstmCache& cache,
                   const Matrix& grad_hidden, std::span<double> grad_w_input,
                   std::span<double> grad_w_recurrent, std::span<double> grad_bias,
                   Matrix* grad_x);

// ------------------------------------------------------------ batchnorm

/// Standalone batch-norm state. Inside a Network gamma/beta live in the
/// FlatParams and the running statistics next to it.
struct BatchNormState {
  std::vector<double> gamma;
  std::vector<double> beta;
  std::vector<double> running_mean;
  std::vector<double> running_var;
  std::uint64_t updates = 0;  // statistic updates folded in so far
  double epsilon = 1e-6;
  double momentum = 0.99;

  static BatchNormState identity(int dim);
};

struct BatchNormCache {
  bool batch_statistics = false;
  Matrix x_hat;
  Eigen::RowVectorXd inv_std;
};

/// Span-based kernel shared by the standalone op and the Network.
/// Train mode normalises with the (population) batch statistics and folds
/// them into the running statistics iff update_stats. The first update
/// replaces the running statistics outright; later ones are an exponential
/// moving average. Infer mode uses the running statistics and never touches
/// them.
Matrix batchnorm_kernel(std::span<const double> gamma, std::span<const double> beta,
                        std::span<double> running_mean, std::span<double> running_var,
                        std::uint64_t& updates, double epsilon, double momentum, const Matrix& x, Mode mode,
                        bool update_stats, BatchNormCache* cache);

void batchnorm_backward(std::span<const double> gamma, const BatchNormCache& cache,
                        const Matrix& grad_y, std::span<double> grad_gamma,
                        std::span<double> grad_beta, Matrix* grad_x);

Matrix batchnorm_forward(BatchNormState& state, const Matrix& batch, Mode mode,
                         bool update_stats, BatchNormCache* cache = nullptr);

}  // namespace r2ad2::nn
