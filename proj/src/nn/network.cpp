#include "r2ad2/nn/network.hpp"

#include <cmath>

#include "r2ad2/error.hpp"

namespace r2ad2::nn {

Network::Network(std::vector<LayerSpec> layers, BatchNormSettings bn)
    : layers_(std::move(layers)), bn_(bn), params_(FlatParams::zeros_for(layers_)) {
  if (!(bn_.epsilon > 0.0)) throw ConfigError("batchnorm epsilon must be positive");
  if (!(bn_.momentum > 0.0 && bn_.momentum < 1.0))
    throw ConfigError("batchnorm momentum must lie in (0, 1)");
  first_block_.assign(layers_.size(), 0);
  for (int i = 0; i < static_cast<int>(layers_.size()); ++i) {
    first_block_[i] = params_.first_block_of(i);
    if (layers_[i].kind == LayerKind::BatchNorm) {
      auto gamma = params_.block(first_block_[i]);
      std::fill(gamma.begin(), gamma.end(), 1.0);
      RunningStats rs;
      rs.layer_id = i;
      rs.mean.assign(layers_[i].out_dim, 0.0);
      rs.var.assign(layers_[i].out_dim, 1.0);
      running_.push_back(std::move(rs));
    }
  }
}

void Network::initialize(std::uint64_t seed) {
  ++generation_;
  std::mt19937_64 rng(seed);
  auto fill_uniform = [&](std::span<double> s, double limit) {
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (double& v : s) v = dist(rng);
  };
  for (int i = 0; i < static_cast<int>(layers_.size()); ++i) {
    const auto& l = layers_[i];
    const std::size_t b = first_block_[i];
    switch (l.kind) {
      case LayerKind::Dense: {
        fill_uniform(params_.block(b), std::sqrt(6.0 / (l.in_dim + l.out_dim)));
        auto bias = params_.block(b + 1);
        std::fill(bias.begin(), bias.end(), 0.0);
        break;
      }
      case LayerKind::Lstm: {
        fill_uniform(params_.block(b), 1.0 / std::sqrt(static_cast<double>(l.in_dim)));
        fill_uniform(params_.block(b + 1), 1.0 / std::sqrt(static_cast<double>(l.out_dim)));
        auto bias = params_.block(b + 2);
        std::fill(bias.begin(), bias.end(), 0.0);
        std::fill(bias.begin() + l.out_dim, bias.begin() + 2 * l.out_dim, 1.0);
        break;
      }
      case LayerKind::BatchNorm: {
        auto gamma = params_.block(b);
        auto beta = params_.block(b + 1);
        std::fill(gamma.begin(), gamma.end(), 1.0);
        std::fill(beta.begin(), beta.end(), 0.0);
        break;
      }
    }
  }
}

void Network::set_params(const FlatParams& p) {
  if (p.layout != params_.layout) throw ConfigError("parameter layout does not match network");
  ++generation_;
  params_ = p;
}

void Network::set_running_stats(std::vector<RunningStats> stats) {
  if (stats.size() != running_.size()) throw ConfigError("running statistics count mismatch");
  for (std::size_t i = 0; i < stats.size(); ++i) {
    if (stats[i].layer_id != running_[i].layer_id ||
        stats[i].mean.size() != running_[i].mean.size() ||
        stats[i].var.size() != running_[i].var.size())
      throw ConfigError("running statistics do not match network");
  }
  running_ = std::move(stats);
}

DenseView Network::dense_view(int layer) const {
  const auto& l = layers_[layer];
  const std::size_t b = first_block_[layer];
  return {ConstMatrixMap(params_.block(b).data(), l.out_dim, l.in_dim),
          ConstVectorMap(params_.block(b + 1).data(), l.out_dim), l.activation};
}

LstmView Network::lstm_view(int layer) const {
  const auto& l = layers_[layer];
  const std::size_t b = first_block_[layer];
  return {ConstMatrixMap(params_.block(b).data(), 4 * l.out_dim, l.in_dim),
          ConstMatrixMap(params_.block(b + 1).data(), 4 * l.out_dim, l.out_dim),
          ConstVectorMap(params_.block(b + 2).data(), 4 * l.out_dim)};
}

RunningStats* Network::stats_for(std::vector<RunningStats>& stats, int layer) const {
  for (auto& s : stats)
    if (s.layer_id == layer) return &s;
  return nullptr;
}

Matrix Network::forward(const Matrix& input, int steps, Mode mode, ForwardCache* cache) const {
  return run(input, steps, mode, false, cache, nullptr);
}

Matrix Network::forward(const Matrix& input, int steps, ForwardOptions options,
                        ForwardCache* cache) {
  const bool update = options.mode == Mode::Train && options.update_stats;
  return run(input, steps, options.mode, update, cache, update ? &running_ : nullptr);
}

Matrix Network::run(const Matrix& input, int steps, Mode mode, bool update_stats,
                    ForwardCache* cache, std::vector<RunningStats>* stats) const {
  if (layers_.empty()) throw UsageError("network has no layers");
  if (steps < 1) throw UsageError("step count must be at least 1");
  if (input.cols() != input_dim())
    throw ConfigError("input has " + std::to_string(input.cols()) + " columns, network expects " +
                      std::to_string(input_dim()));
  if (input.rows() % steps != 0)
    throw ConfigError("input rows are not a multiple of the step count");
  const Eigen::Index B = input.rows() / steps;

  std::vector<Matrix> acts;
  acts.reserve(layers_.size() + 1);
  acts.push_back(input);
  std::vector<ForwardCache::LayerCache> caches(layers_.size());

  // Scratch copy of running stats for the pure path; keeps batchnorm_kernel's
  // span interface without mutating *this.
  std::vector<RunningStats> scratch;
  for (int i = 0; i < static_cast<int>(layers_.size()); ++i) {
    const auto& l = layers_[i];
    const Matrix& x = acts.back();
    Matrix y;
    switch (l.kind) {
      case LayerKind::Dense:
        y = dense_forward(dense_view(i), x);
        break;
      case LayerKind::Lstm: {
        LstmCache lc;
        y = lstm_forward(lstm_view(i), x, steps, cache ? &lc : nullptr).hidden;
        if (cache) caches[i] = std::move(lc);
        break;
      }
      case LayerKind::BatchNorm: {
        const std::size_t b = first_block_[i];
        RunningStats* rs = nullptr;
        if (update_stats) {
          rs = stats_for(*stats, i);
        } else {
          if (scratch.empty()) scratch = running_;
          rs = stats_for(scratch, i);
        }
        BatchNormCache bc;
        y = batchnorm_kernel(params_.block(b), params_.block(b + 1), rs->mean, rs->var, rs->updates,
                             bn_.epsilon, bn_.momentum, x, mode, update_stats,
                             cache ? &bc : nullptr);
        if (cache) caches[i] = std::move(bc);
        break;
      }
    }
    if (!y.allFinite())
      throw NumericError("non-finite activation in layer " + std::to_string(i) + " (" +
                         to_string(l.kind) + ")");
    acts.push_back(std::move(y));
  }

  Matrix out = acts.back().bottomRows(B);
  if (cache) {
    cache->owner_ = this;
    cache->generation_ = generation_;
    cache->batch_ = static_cast<int>(B);
    cache->steps_ = steps;
    cache->activations = std::move(acts);
    cache->layer_caches = std::move(caches);
  }
  return out;
}

Gradients Network::backward(const ForwardCache& cache, const Matrix& grad_output) const {
  if (cache.owner_ != this) throw UsageError("forward cache belongs to a different network");
  if (cache.generation_ != generation_)
    throw UsageError("forward cache is stale: parameters changed since the forward pass");
  const Eigen::Index B = cache.batch_;
  if (grad_output.rows() != B || grad_output.cols() != output_dim())
    throw UsageError("upstream gradient must be [" + std::to_string(B) + " x " +
                     std::to_string(output_dim()) + "]");

  Gradients g;
  g.params.assign(params_.size(), 0.0);
  const Eigen::Index rows = B * cache.steps_;
  Matrix grad = Matrix::Zero(rows, output_dim());
  grad.bottomRows(B) = grad_output;

  auto span_of = [&](std::size_t block) {
    const auto& pb = params_.layout[block];
    return std::span<double>(g.params.data() + pb.offset, pb.size());
  };

  for (int i = static_cast<int>(layers_.size()) - 1; i >= 0; --i) {
    const Matrix& x = cache.activations[i];
    const Matrix& y = cache.activations[i + 1];
    const std::size_t b = first_block_[i];
    Matrix grad_x;
    switch (layers_[i].kind) {
      case LayerKind::Dense:
        dense_backward(dense_view(i), x, y, grad, span_of(b), span_of(b + 1), &grad_x);
        break;
      case LayerKind::Lstm:
        lstm_backward(lstm_view(i), x, std::get<LstmCache>(cache.layer_caches[i]), grad,
                      span_of(b), span_of(b + 1), span_of(b + 2), &grad_x);
        break;
      case LayerKind::BatchNorm:
        batchnorm_backward(params_.block(b), std::get<BatchNormCache>(cache.layer_caches[i]),
                           grad, span_of(b), span_of(b + 1), &grad_x);
        break;
    }
    grad = std::move(grad_x);
  }
  g.input = std::move(grad);
  return g;
}

void Network::mask_batchnorm_params(std::span<double> grad) const {
  if (grad.size() != params_.size()) throw UsageError("gradient size mismatch");
  for (const auto& pb : params_.layout) {
    if (pb.kind == ParamKind::Gamma || pb.kind == ParamKind::Beta)
      std::fill_n(grad.begin() + static_cast<std::ptrdiff_t>(pb.offset), pb.size(), 0.0);
  }
}

}  // namespace r2ad2::nn
