#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace r2ad2::nn {

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step_count = 0;
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  explicit AdamState(std::size_t n, double learning_rate = 0.001)
      : m(n, 0.0), v(n, 0.0), lr(learning_rate) {}
};

/// One bias-corrected Adam update. Throws NumericError (leaving params and
/// state untouched) if the gradient holds a NaN or infinity.
void adam_step(std::span<double> params, std::span<const double> grad, AdamState& state);

}  // namespace r2ad2::nn
