#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <variant>
#include <vector>

#include "r2ad2/nn/layers.hpp"
#include "r2ad2/nn/params.hpp"
#include "r2ad2/nn/tensor.hpp"

namespace r2ad2::nn {

struct BatchNormSettings {
  double epsilon = 1e-6;
  double momentum = 0.99;
};

/// Running statistics of one batch-norm layer (not trainable).
struct RunningStats {
  int layer_id = 0;
  std::vector<double> mean;
  std::vector<double> var;
  std::uint64_t updates = 0;
  bool operator==(const RunningStats&) const = default;
};

class Network;

/// Everything backward() needs from one forward pass. Bound to the network
/// and parameter generation that produced it.
class ForwardCache {
 public:
  ForwardCache() = default;
  int batch() const { return batch_; }
  int steps() const { return steps_; }

 private:
  friend class Network;
  using LayerCache = std::variant<std::monostate, LstmCache, BatchNormCache>;
  const Network* owner_ = nullptr;
  std::uint64_t generation_ = 0;
  int batch_ = 0;
  int steps_ = 0;
  std::vector<Matrix> activations;  // activations[0] is the input
  std::vector<LayerCache> layer_caches;
};

struct Gradients {
  std::vector<double> params;  // FlatParams layout
  Matrix input;                 // [S*B x in_dim]
};

struct ForwardOptions {
  Mode mode = Mode::Infer;
  /// Only meaningful in Train mode.
  bool update_stats = false;
};

/// A stack of dense, LSTM and time-distributed batch-norm layers with
/// hand-written backpropagation.
///
/// Inputs are [S*B x in] step-major sequence batches (S = 1 for plain
/// feed-forward use). Dense and batch-norm layers act on every step; the
/// network output is the last step's block of the final layer, [B x out].
class Network {
 public:
  Network() = default;
  explicit Network(std::vector<LayerSpec> layers, BatchNormSettings bn = {});

  /// Dense: U(+-sqrt(6/(fan_in+fan_out))), zero bias. LSTM: U(+-1/sqrt(fan_in))
  /// per weight matrix, forget-gate bias 1. Batch-norm: gamma 1, beta 0.
  void initialize(std::uint64_t seed);

  const std::vector<LayerSpec>& layers() const { return layers_; }
  int input_dim() const { return layers_.front().in_dim; }
  int output_dim() const { return layers_.back().out_dim; }
  std::size_t param_count() const { return params_.size(); }

  const FlatParams& params() const { return params_; }
  /// Mutable access invalidates every outstanding ForwardCache.
  FlatParams& mutable_params() {
    ++generation_;
    return params_;
  }
  void set_params(const FlatParams& p);

  const BatchNormSettings& bn_settings() const { return bn_; }
  const std::vector<RunningStats>& running_stats() const { return running_; }
  void set_running_stats(std::vector<RunningStats> stats);

  /// Pure forward pass: never changes running statistics.
  Matrix forward(const Matrix& input, int steps, Mode mode,
                 ForwardCache* cache = nullptr) const;

  /// Forward pass that folds batch statistics into the running statistics
  /// when options.update_stats is set (Train mode only).
  Matrix forward(const Matrix& input, int steps, ForwardOptions options,
                 ForwardCache* cache);

  /// Inference without a cache.
  Matrix predict(const Matrix& input, int steps = 1) const {
    return forward(input, steps, Mode::Infer, nullptr);
  }

  /// grad_output is dL/d(output) with shape [B x out].
  Gradients backward(const ForwardCache& cache, const Matrix& grad_output) const;

  /// Zeroes the gamma/beta entries of a FlatParams-shaped gradient.
  void mask_batchnorm_params(std::span<double> grad) const;

  std::uint64_t generation() const { return generation_; }

 private:
  Matrix run(const Matrix& input, int steps, Mode mode, bool update_stats,
             ForwardCache* cache, std::vector<RunningStats>* stats) const;
  DenseView dense_view(int layer) const;
  LstmView lstm_view(int layer) const;
  RunningStats* stats_for(std::vector<RunningStats>& stats, int layer) const;

  std::vector<LayerSpec> layers_;
  BatchNormSettings bn_;
  FlatParams params_;
  std::vector<std::size_t> first_block_;  // per layer
  std::vector<RunningStats> running_;
  std::uint64_t generation_ = 1;
};

}  // namespace r2ad2::nn
