#pragma once

// Central finite-difference oracle for the hand-written backward pass.
// Test-only: it uses nothing but Network::forward.

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "r2ad2/nn/network.hpp"

namespace r2ad2::testing {

struct GradCheckResult {
  std::size_t coords = 0;
  std::size_t below_1e4 = 0;  // coordinates with relative error < 1e-4
  double max_rel_error = 0.0;

  double fraction_ok() const { return coords ? double(below_1e4) / double(coords) : 1.0; }
  bool passes() const { return fraction_ok() >= 0.99 && max_rel_error < 1e-3; }
};

// Relative error with an absolute floor so coordinates whose true gradient
// is ~0 (e.g. a bias feeding batch-norm) are judged on absolute error; the
// floor sits well above central-difference roundoff at h = 1e-4.
inline double rel_error(double a, double b, double floor = 1e-5) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

struct ProbeLoss {
  nn::Matrix weights;  // [B x out]; L = sum(weights .* output)
  double operator()(const nn::Matrix& out) const { return (weights.array() * out.array()).sum(); }
};

// Checks parameter and input gradients of `net` at `input` for a random
// linear probe loss. Batch-norm runs in Train mode (batch statistics), the
// path alarm training differentiates.
inline GradCheckResult check_network(nn::Network& net, const nn::Matrix& input, int steps,
                                     std::uint64_t seed, nn::Mode mode = nn::Mode::Train,
                                     double h = 1e-4) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  const Eigen::Index B = input.rows() / steps;
  ProbeLoss loss{nn::Matrix(B, net.output_dim())};
  for (Eigen::Index i = 0; i < loss.weights.size(); ++i) loss.weights.data()[i] = nd(rng);

  nn::ForwardCache cache;
  net.forward(input, steps, mode, &cache);
  const nn::Gradients g = net.backward(cache, loss.weights);

  GradCheckResult r;
  auto record = [&](double analytic, double numeric) {
    const double e = rel_error(analytic, numeric);
    r.coords++;
    if (e < 1e-4) r.below_1e4++;
    r.max_rel_error = std::max(r.max_rel_error, e);
  };

  nn::FlatParams p = net.params();
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double orig = p.values[k];
    p.values[k] = orig + h;
    net.set_params(p);
    const double up = loss(net.forward(input, steps, mode));
    p.values[k] = orig - h;
    net.set_params(p);
    const double down = loss(net.forward(input, steps, mode));
    p.values[k] = orig;
    record(g.params[k], (up - down) / (2 * h));
  }
  net.set_params(p);

  nn::Matrix x = input;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double orig = x.data()[k];
    x.data()[k] = orig + h;
    const double up = loss(net.forward(x, steps, mode));
    x.data()[k] = orig - h;
    const double down = loss(net.forward(x, steps, mode));
    x.data()[k] = orig;
    record(g.input.data()[k], (up - down) / (2 * h));
  }
  return r;
}

struct RandomConfig {
  std::vector<nn::LayerSpec> layers;
  int steps = 1;
  int batch = 1;
  std::string describe() const {
    std::string s = "steps=" + std::to_string(steps) + " batch=" + std::to_string(batch) + " | ";
    for (const auto& l : layers) {
      s += nn::to_string(l.kind) + "(" + std::to_string(l.in_dim) + "->" +
           std::to_string(l.out_dim);
      if (l.kind == nn::LayerKind::Dense) s += "," + nn::to_string(l.activation);
      s += ") ";
    }
    return s;
  }
};

// Small random stacks of at most 50 parameters drawing every layer kind.
inline RandomConfig random_config(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> n_layers(1, 4), dim(1, 3), kind(0, 5), steps(1, 3),
      batch(2, 4);
  static const nn::Activation acts[] = {nn::Activation::Relu, nn::Activation::Sigmoid,
                                        nn::Activation::Tanh, nn::Activation::Linear};
  for (;;) {
    RandomConfig c;
    c.steps = steps(rng);
    c.batch = batch(rng);
    int in = dim(rng);
    const int n = n_layers(rng);
    for (int i = 0; i < n; ++i) {
      const int k = kind(rng);
      if (k == 4) {
        c.layers.push_back(nn::LayerSpec::lstm(in, dim(rng)));
      } else if (k == 5) {
        c.layers.push_back(nn::LayerSpec::batchnorm(in));
      } else {
        c.layers.push_back(nn::LayerSpec::dense(in, dim(rng), acts[k]));
      }
      in = c.layers.back().out_dim;
    }
    if (nn::FlatParams::zeros_for(c.layers).size() <= 50) return c;
  }
}

// Random parameters everywhere (biases included) so no ReLU sits exactly on
// its kink.
inline void randomize_params(nn::Network& net, std::mt19937_64& rng, double scale = 0.7) {
  std::normal_distribution<double> nd(0.0, scale);
  nn::FlatParams p = net.params();
  for (double& v : p.values) v += nd(rng);
  net.set_params(p);
}

inline nn::Matrix random_input(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> nd(0.0, 1.0);
  nn::Matrix x(rows, cols);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = nd(rng);
  return x;
}

}  // namespace r2ad2::testing
