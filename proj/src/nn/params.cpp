#include "r2ad2/nn/params.hpp"

#include <sstream>

#include "r2ad2/error.hpp"
#include "r2ad2/hash.hpp"

namespace r2ad2::nn {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Relu: return "relu";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Tanh: return "tanh";
    case Activation::Linear: return "linear";
  }
  return "?";
}

std::string to_string(LayerKind k) {
  switch (k) {
    case LayerKind::Dense: return "dense";
    case LayerKind::Lstm: return "lstm";
    case LayerKind::BatchNorm: return "batchnorm";
  }
  return "?";
}

std::string to_string(ParamKind k) {
  switch (k) {
    case ParamKind::Weight: return "weight";
    case ParamKind::Bias: return "bias";
    case ParamKind::Gamma: return "gamma";
    case ParamKind::Beta: return "beta";
    case ParamKind::LstmGate: return "lstm_gate";
  }
  return "?";
}

void validate_architecture(std::span<const LayerSpec> layers) {
  if (layers.empty()) throw ConfigError("network needs at least one layer");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.in_dim <= 0 || l.out_dim <= 0)
      throw ConfigError("layer " + std::to_string(i) + ": dimensions must be positive");
    if (l.kind == LayerKind::BatchNorm && l.in_dim != l.out_dim)
      throw ConfigError("layer " + std::to_string(i) + ": batchnorm needs in_dim == out_dim");
    if (i > 0 && layers[i - 1].out_dim != l.in_dim)
      throw ConfigError("layer " + std::to_string(i) + ": in_dim " + std::to_string(l.in_dim) +
                        " does not match previous out_dim " +
                        std::to_string(layers[i - 1].out_dim));
  }
}

std::string architecture_to_text(std::span<const LayerSpec> layers) {
  std::ostringstream out;
  for (const auto& l : layers) {
    out << to_string(l.kind) << ' ' << l.in_dim << ' ' << l.out_dim;
    if (l.kind == LayerKind::Dense) out << ' ' << to_string(l.activation);
    out << '\n';
  }
  return out.str();
}

namespace {
Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::Relu;
  if (s == "sigmoid") return Activation::Sigmoid;
  if (s == "tanh") return Activation::Tanh;
  if (s == "linear") return Activation::Linear;
  throw ConfigError("unknown activation '" + s + "'");
}
}  // namespace

std::vector<LayerSpec> architecture_from_text(const std::string& text) {
  std::vector<LayerSpec> layers;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string kind;
    LayerSpec spec;
    if (!(ls >> kind >> spec.in_dim >> spec.out_dim))
      throw ConfigError("malformed architecture line '" + line + "'");
    if (kind == "dense") {
      std::string act;
      if (!(ls >> act)) throw ConfigError("dense layer without activation: '" + line + "'");
      spec.kind = LayerKind::Dense;
      spec.activation = parse_activation(act);
    } else if (kind == "lstm") {
      spec.kind = LayerKind::Lstm;
    } else if (kind == "batchnorm") {
      spec.kind = LayerKind::BatchNorm;
    } else {
      throw ConfigError("unknown layer kind '" + kind + "'");
    }
    layers.push_back(spec);
  }
  validate_architecture(layers);
  return layers;
}

FlatParams FlatParams::zeros_for(std::span<const LayerSpec> layers) {
  validate_architecture(layers);
  FlatParams p;
  std::size_t offset = 0;
  auto add = [&](int layer, ParamKind kind, int rows, int cols) {
    p.layout.push_back({layer, kind, rows, cols, offset});
    offset += static_cast<std::size_t>(rows) * cols;
  };
  for (int i = 0; i < static_cast<int>(layers.size()); ++i) {
    const auto& l = layers[i];
    switch (l.kind) {
      case LayerKind::Dense:
        add(i, ParamKind::Weight, l.out_dim, l.in_dim);
        add(i, ParamKind::Bias, l.out_dim, 1);
        break;
      case LayerKind::Lstm:
        add(i, ParamKind::LstmGate, 4 * l.out_dim, l.in_dim);
        add(i, ParamKind::LstmGate, 4 * l.out_dim, l.out_dim);
        add(i, ParamKind::LstmGate, 4 * l.out_dim, 1);
        break;
      case LayerKind::BatchNorm:
        add(i, ParamKind::Gamma, l.out_dim, 1);
        add(i, ParamKind::Beta, l.out_dim, 1);
        break;
    }
  }
  p.values.assign(offset, 0.0);
  return p;
}

std::size_t FlatParams::first_block_of(int layer_id) const {
  for (std::size_t i = 0; i < layout.size(); ++i)
    if (layout[i].layer_id == layer_id) return i;
  throw UsageError("layer " + std::to_string(layer_id) + " has no parameters");
}

std::uint64_t FlatParams::hash() const {
  Hasher h;
  h.u64(layout.size());
  for (const auto& b : layout)
    h.u64(static_cast<std::uint64_t>(b.layer_id))
        .u64(static_cast<std::uint64_t>(b.kind))
        .u64(static_cast<std::uint64_t>(b.rows))
        .u64(static_cast<std::uint64_t>(b.cols));
  h.f64s(values);
  return h.digest();
}

}  // namespace r2ad2::nn
