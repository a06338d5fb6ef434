#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "r2ad2/nn/tensor.hpp"

namespace r2ad2::nn {

enum class LayerKind { Dense, Lstm, BatchNorm };
enum class Activation { Relu, Sigmoid, Tanh, Linear };

/// One layer of a network. Dense layers carry an activation; LSTM layers use
/// the fixed sigmoid/tanh gating; batch normalisation requires in == out.
struct LayerSpec {
  LayerKind kind = LayerKind::Dense;
  int in_dim = 0;
  int out_dim = 0;
  Activation activation = Activation::Linear;

  static LayerSpec dense(int in, int out, Activation act) {
    return {LayerKind::Dense, in, out, act};
  }
  static LayerSpec lstm(int in, int hidden) {
    return {LayerKind::Lstm, in, hidden, Activation::Linear};
  }
  static LayerSpec batchnorm(int dim) {
    return {LayerKind::BatchNorm, dim, dim, Activation::Linear};
  }

  bool operator==(const LayerSpec&) const = default;
};

/// Throws ConfigError on non-positive dims, mismatched chaining or a
/// batch-norm layer whose in_dim differs from out_dim.
void validate_architecture(std::span<const LayerSpec> layers);

/// One line per layer, e.g. "dense 8 6 relu", "lstm 188 100",
/// "batchnorm 188 188". Parsing the text gives back the same specs.
std::string architecture_to_text(std::span<const LayerSpec> layers);
std::vector<LayerSpec> architecture_from_text(const std::string& text);

std::string to_string(Activation a);
std::string to_string(LayerKind k);

enum class ParamKind { Weight, Bias, Gamma, Beta, LstmGate };
std::string to_string(ParamKind k);

/// A contiguous [rows x cols] row-major block inside FlatParams::values.
struct ParamBlock {
  int layer_id = 0;
  ParamKind kind = ParamKind::Weight;
  int rows = 0;
  int cols = 0;
  std::size_t offset = 0;

  std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
  bool operator==(const ParamBlock&) const = default;
};

/// All trainable parameters of a network as one flat vector plus the layout
/// map. Per-sample gradients share this shape.
///
/// Layout per layer, in layer order:
///   dense      weight [out x in], bias [out x 1]
///   lstm       input weights [4H x in], recurrent weights [4H x H],
///              bias [4H x 1]; gate order is input, forget, cell, output
///   batchnorm  gamma [D x 1], beta [D x 1]
/// Cache-line aligned storage: Eigen picks its summation order from the
/// address alignment, so an unaligned base would make results depend on the
/// heap layout.
using AlignedValues = std::vector<double, Eigen::aligned_allocator<double>>;

struct FlatParams {
  AlignedValues values;
  std::vector<ParamBlock> layout;

  static FlatParams zeros_for(std::span<const LayerSpec> layers);

  std::size_t size() const { return values.size(); }
  std::span<double> block(std::size_t i) {
    return {values.data() + layout[i].offset, layout[i].size()};
  }
  std::span<const double> block(std::size_t i) const {
    return {values.data() + layout[i].offset, layout[i].size()};
  }
  /// Index of the first block belonging to layer_id.
  std::size_t first_block_of(int layer_id) const;

  std::uint64_t hash() const;
  bool operator==(const FlatParams&) const = default;
};

}  // namespace r2ad2::nn
