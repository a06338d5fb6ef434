#include "r2ad2/nn/optim.hpp"

#include <cmath>

#include "r2ad2/error.hpp"

namespace r2ad2::nn {

void adam_step(std::span<double> params, std::span<const double> grad, AdamState& s) {
  if (grad.size() != params.size() || s.m.size() != params.size() || s.v.size() != params.size())
    throw UsageError("adam: gradient, state and parameter sizes differ");
  for (std::size_t i = 0; i < grad.size(); ++i)
    if (!std::isfinite(grad[i]))
      throw NumericError("adam: non-finite gradient at index " + std::to_string(i));

  s.step_count += 1;
  const double t = static_cast<double>(s.step_count);
  const double c1 = 1.0 - std::pow(s.beta1, t);
  const double c2 = 1.0 - std::pow(s.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * grad[i];
    s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * grad[i] * grad[i];
    const double m_hat = s.m[i] / c1;
    const double v_hat = s.v[i] / c2;
    params[i] -= s.lr * m_hat / (std::sqrt(v_hat) + s.eps);
  }
}

}  // namespace r2ad2::nn
