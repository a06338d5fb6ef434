#include "r2ad2/nn/layers.hpp"

#include <cmath>

#include "r2ad2/error.hpp"

namespace r2ad2::nn {

namespace {

inline double sigm(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void apply_activation(Activation a, Matrix& z) {
  switch (a) {
    case Activation::Relu: z = z.cwiseMax(0.0); break;
    case Activation::Sigmoid: z = z.unaryExpr([](double v) { return sigm(v); }); break;
    case Activation::Tanh: z = z.array().tanh().matrix(); break;
    case Activation::Linear: break;
  }
}

Eigen::Map<Matrix> as_matrix(std::span<double> s, Eigen::Index rows, Eigen::Index cols) {
  return {s.data(), rows, cols};
}

// Column sums are evaluated into an aligned temporary first: written straight
// into a span, Eigen's summation order would depend on the span's address.
void accumulate(std::span<double> dst, const Eigen::RowVectorXd& column_sums) {
  Eigen::Map<Eigen::RowVectorXd>(dst.data(), column_sums.size()) += column_sums;
}

}  // namespace

double activate(Activation a, double z) {
  switch (a) {
    case Activation::Relu: return z > 0.0 ? z : 0.0;
    case Activation::Sigmoid: return sigm(z);
    case Activation::Tanh: return std::tanh(z);
    case Activation::Linear: return z;
  }
  return z;
}

double activation_slope(Activation a, double y) {
  switch (a) {
    case Activation::Relu: return y > 0.0 ? 1.0 : 0.0;
    case Activation::Sigmoid: return y * (1.0 - y);
    case Activation::Tanh: return 1.0 - y * y;
    case Activation::Linear: return 1.0;
  }
  return 1.0;
}

Matrix dense_forward(const DenseView& layer, const Matrix& x) {
  if (x.cols() != layer.weight.cols())
    throw ConfigError("dense input has " + std::to_string(x.cols()) + " columns, expected " +
                      std::to_string(layer.weight.cols()));
  Matrix z(x.rows(), layer.weight.rows());
  z.noalias() = x * layer.weight.transpose();
  z.rowwise() += layer.bias.transpose();
  apply_activation(layer.activation, z);
  return z;
}

void dense_backward(const DenseView& layer, const Matrix& x, const Matrix& y,
                    const Matrix& grad_y, std::span<double> grad_weight,
                    std::span<double> grad_bias, Matrix* grad_x) {
  Matrix dz = grad_y;
  if (layer.activation != Activation::Linear) {
    const Activation a = layer.activation;
    dz.array() *= y.unaryExpr([a](double v) { return activation_slope(a, v); }).array();
  }
  auto gw = as_matrix(grad_weight, layer.weight.rows(), layer.weight.cols());
  gw.noalias() += dz.transpose() * x;
  accumulate(grad_bias, dz.colwise().sum());
  if (grad_x) {
    grad_x->resize(x.rows(), x.cols());
    grad_x->noalias() = dz * layer.weight;
  }
}

LstmOutput lstm_forward(const LstmView& cell, const Matrix& x, int steps, LstmCache* cache) {
  const int H = cell.hidden();
  if (cell.w_input.rows() != 4 * H || cell.bias.size() != 4 * H)
    throw ConfigError("lstm weights are not [4H x in]");
  if (x.cols() != cell.w_input.cols())
    throw ConfigError("lstm input has " + std::to_string(x.cols()) + " columns, expected " +
                      std::to_string(cell.w_input.cols()));
  if (steps < 1) throw UsageError("lstm needs at least one time step");
  if (x.rows() % steps != 0) throw ConfigError("lstm input rows not divisible by step count");
  const Eigen::Index B = x.rows() / steps;

  Matrix gates(x.rows(), 4 * H);
  gates.noalias() = x * cell.w_input.transpose();
  gates.rowwise() += cell.bias.transpose();

  Matrix c_all(x.rows(), H), ct_all(x.rows(), H), h_all(x.rows(), H);
  Matrix h_prev = Matrix::Zero(B, H);
  Matrix c_prev = Matrix::Zero(B, H);
  for (int t = 0; t < steps; ++t) {
    auto z = gates.middleRows(t * B, B);
    if (t > 0) z.noalias() += h_prev * cell.w_recurrent.transpose();
    z.leftCols(2 * H) = z.leftCols(2 * H).unaryExpr([](double v) { return sigm(v); });
    z.middleCols(2 * H, H) = z.middleCols(2 * H, H).array().tanh().matrix();
    z.rightCols(H) = z.rightCols(H).unaryExpr([](double v) { return sigm(v); });

    auto i = z.leftCols(H).array();
    auto f = z.middleCols(H, H).array();
    auto g = z.middleCols(2 * H, H).array();
    auto o = z.rightCols(H).array();
    auto c = c_all.middleRows(t * B, B);
    c.array() = f * c_prev.array() + i * g;
    auto ct = ct_all.middleRows(t * B, B);
    ct.array() = c.array().tanh();
    auto h = h_all.middleRows(t * B, B);
    h.array() = o * ct.array();
    h_prev = h;
    c_prev = c;
  }

  LstmOutput out;
  out.final_hidden = h_prev;
  out.final_cell = c_prev;
  if (cache) {
    cache->steps = steps;
    cache->gates = std::move(gates);
    cache->cell = std::move(c_all);
    cache->cell_tanh = std::move(ct_all);
    cache->hidden = h_all;
  }
  out.hidden = std::move(h_all);
  return out;
}

void lstm_backward(const LstmView& cell, const Matrix& x, const LstmCache& cache,
                   const Matrix& grad_hidden, std::span<double> grad_w_input,
                   std::span<double> grad_w_recurrent, std::span<double> grad_bias,
                   Matrix* grad_x) {
  const int H = cell.hidden();
  const int steps = cache.steps;
  const Eigen::Index B = x.rows() / steps;
  if (grad_hidden.rows() != x.rows() || grad_hidden.cols() != H)
    throw UsageError("lstm upstream gradient has the wrong shape");

  Matrix dz_all(x.rows(), 4 * H);
  Matrix dh_next = Matrix::Zero(B, H);
  Matrix dc_next = Matrix::Zero(B, H);
  Eigen::ArrayXXd dc(B, H);
  for (int t = steps - 1; t >= 0; --t) {
    const auto z = cache.gates.middleRows(t * B, B);
    const auto i = z.leftCols(H).array();
    const auto f = z.middleCols(H, H).array();
    const auto g = z.middleCols(2 * H, H).array();
    const auto o = z.rightCols(H).array();
    const auto ct = cache.cell_tanh.middleRows(t * B, B).array();

    const Eigen::ArrayXXd dh = (grad_hidden.middleRows(t * B, B) + dh_next).array();
    dc = dh * o * (1.0 - ct * ct) + dc_next.array();

    auto dz = dz_all.middleRows(t * B, B);
    dz.leftCols(H).array() = dc * g * i * (1.0 - i);
    if (t > 0) {
      const auto c_prev = cache.cell.middleRows((t - 1) * B, B).array();
      dz.middleCols(H, H).array() = dc * c_prev * f * (1.0 - f);
    } else {
      dz.middleCols(H, H).setZero();
    }
    dz.middleCols(2 * H, H).array() = dc * i * (1.0 - g * g);
    dz.rightCols(H).array() = dh * ct * o * (1.0 - o);

    dc_next.array() = dc * f;
    dh_next.noalias() = dz * cell.w_recurrent;
  }

  as_matrix(grad_w_input, 4 * H, x.cols()).noalias() += dz_all.transpose() * x;
  if (steps > 1) {
    const Eigen::Index tail = (steps - 1) * B;
    as_matrix(grad_w_recurrent, 4 * H, H).noalias() +=
        dz_all.bottomRows(tail).transpose() * cache.hidden.topRows(tail);
  }
  accumulate(grad_bias, dz_all.colwise().sum());
  if (grad_x) {
    grad_x->resize(x.rows(), x.cols());
    grad_x->noalias() = dz_all * cell.w_input;
  }
}

BatchNormState BatchNormState::identity(int dim) {
  BatchNormState s;
  s.gamma.assign(dim, 1.0);
  s.beta.assign(dim, 0.0);
  s.running_mean.assign(dim, 0.0);
  s.running_var.assign(dim, 1.0);
  return s;
}

Matrix batchnorm_kernel(std::span<const double> gamma, std::span<const double> beta,
                        std::span<double> running_mean, std::span<double> running_var,
                        std::uint64_t& updates, double epsilon, double momentum, const Matrix& x, Mode mode,
                        bool update_stats, BatchNormCache* cache) {
  const Eigen::Index D = static_cast<Eigen::Index>(gamma.size());
  if (x.rows() == 0) throw UsageError("batchnorm on an empty batch");
  if (x.cols() != D)
    throw ConfigError("batchnorm input has " + std::to_string(x.cols()) + " columns, expected " +
                      std::to_string(D));
  if (!(epsilon > 0.0)) throw ConfigError("batchnorm epsilon must be positive");

  Eigen::RowVectorXd mean, var;
  if (mode == Mode::Train) {
    mean = x.colwise().mean();
    var = (x.rowwise() - mean).array().square().colwise().mean().matrix();
    if (update_stats) {
      const double keep = updates == 0 ? 0.0 : momentum;
      for (Eigen::Index j = 0; j < D; ++j) {
        running_mean[j] = keep * running_mean[j] + (1.0 - keep) * mean[j];
        running_var[j] = keep * running_var[j] + (1.0 - keep) * var[j];
      }
      ++updates;
    }
  } else {
    mean = Eigen::Map<const Eigen::RowVectorXd>(running_mean.data(), D);
    var = Eigen::Map<const Eigen::RowVectorXd>(running_var.data(), D);
  }
  const Eigen::RowVectorXd inv_std = (var.array() + epsilon).rsqrt().matrix();
  Matrix x_hat = (x.rowwise() - mean).array().rowwise() * inv_std.array();
  const Eigen::Map<const Eigen::RowVectorXd> g(gamma.data(), D);
  const Eigen::Map<const Eigen::RowVectorXd> b(beta.data(), D);
  Matrix y = (x_hat.array().rowwise() * g.array()).rowwise() + b.array();
  if (cache) {
    cache->batch_statistics = mode == Mode::Train;
    cache->x_hat = std::move(x_hat);
    cache->inv_std = inv_std;
  }
  return y;
}

void batchnorm_backward(std::span<const double> gamma, const BatchNormCache& cache,
                        const Matrix& grad_y, std::span<double> grad_gamma,
                        std::span<double> grad_beta, Matrix* grad_x) {
  const Eigen::Index D = static_cast<Eigen::Index>(gamma.size());
  const auto& x_hat = cache.x_hat;
  if (grad_y.rows() != x_hat.rows() || grad_y.cols() != D)
    throw UsageError("batchnorm upstream gradient has the wrong shape");
  accumulate(grad_gamma, (grad_y.array() * x_hat.array()).colwise().sum().matrix());
  accumulate(grad_beta, grad_y.colwise().sum());
  if (!grad_x) return;

  const Eigen::Map<const Eigen::RowVectorXd> g(gamma.data(), D);
  const Eigen::RowVectorXd scale = (g.array() * cache.inv_std.array()).matrix();
  if (!cache.batch_statistics) {
    *grad_x = grad_y.array().rowwise() * scale.array();
    return;
  }
  // dx = gamma * inv_std * (dy - mean(dy) - x_hat * mean(dy * x_hat))
  const double n = static_cast<double>(x_hat.rows());
  const Eigen::RowVectorXd mean_dy = grad_y.colwise().sum() / n;
  const Eigen::RowVectorXd mean_dy_xhat =
      (grad_y.array() * x_hat.array()).colwise().sum().matrix() / n;
  Matrix centered = grad_y.rowwise() - mean_dy;
  centered.array() -= x_hat.array().rowwise() * mean_dy_xhat.array();
  *grad_x = centered.array().rowwise() * scale.array();
}

Matrix batchnorm_forward(BatchNormState& state, const Matrix& batch, Mode mode,
                         bool update_stats, BatchNormCache* cache) {
  return batchnorm_kernel(state.gamma, state.beta, state.running_mean, state.running_var,
                          state.updates, state.epsilon, state.momentum, batch, mode, update_stats, cache);
}

}  // namespace r2ad2::nn
