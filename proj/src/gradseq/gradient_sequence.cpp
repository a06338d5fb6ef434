#include "r2ad2/gradseq/gradient_sequence.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "r2ad2/error.hpp"
#include "r2ad2/log.hpp"
#include "r2ad2/nn/loss.hpp"

namespace r2ad2::gradseq {

namespace {

// Writes the gradient of one sample at one snapshot into `out`.
void gradient_into(const nn::Network& net, const nn::Matrix& row, double* out, int snapshot_idx) {
  if (row.cols() != net.input_dim() || net.output_dim() != net.input_dim())
    throw ConfigError("sample has " + std::to_string(row.cols()) + " features, network maps " +
                      std::to_string(net.input_dim()) + " -> " + std::to_string(net.output_dim()));
  nn::ForwardCache cache;
  const nn::Matrix recon = net.forward(row, 1, nn::Mode::Infer, &cache);
  const nn::Gradients g = net.backward(cache, nn::loss_mse_grad(recon, row));
  for (std::size_t k = 0; k < g.params.size(); ++k) {
    if (!std::isfinite(g.params[k]))
      throw NumericError("non-finite gradient at snapshot " + std::to_string(snapshot_idx) +
                         ", parameter " + std::to_string(k));
    out[k] = g.params[k];
  }
}

void gradient_into(const ae::SnapshotFamily& family, int snapshot_idx, const nn::Matrix& row,
                   double* out) {
  gradient_into(family.snapshot(snapshot_idx), row, out, snapshot_idx);
}

nn::Matrix as_row(std::span<const double> x) {
  return nn::ConstMatrixMap(x.data(), 1, static_cast<Eigen::Index>(x.size()));
}

}  // namespace

std::vector<double> sample_gradient(const nn::Network& net, std::span<const double> x) {
  std::vector<double> g(net.param_count());
  gradient_into(net, as_row(x), g.data(), 0);
  return g;
}

std::vector<double> extract_gradient(const ae::SnapshotFamily& family, int snapshot_idx,
                                     std::span<const double> x) {
  std::vector<double> g(family.param_count());
  gradient_into(family, snapshot_idx, as_row(x), g.data());
  return g;
}

GradientSequence extract_sequence(const ae::SnapshotFamily& family, std::span<const double> x,
                                  std::size_t sample_id) {
  if (family.size() == 0) throw UsageError("empty snapshot family");
  GradientSequence seq;
  seq.sample_id = sample_id;
  seq.grads.resize(family.size(), static_cast<Eigen::Index>(family.param_count()));
  const nn::Matrix row = as_row(x);
  for (int s = 0; s < family.size(); ++s) gradient_into(family, s, row, seq.grads.row(s).data());
  return seq;
}

nn::Matrix alarm_input(const ae::SnapshotFamily& family, const nn::Matrix& samples) {
  const Eigen::Index B = samples.rows();
  nn::Matrix out(B * family.size(), static_cast<Eigen::Index>(family.param_count()));
  for (Eigen::Index b = 0; b < B; ++b) {
    const nn::Matrix row = samples.row(b);
    for (int s = 0; s < family.size(); ++s) gradient_into(family, s, row, out.row(s * B + b).data());
  }
  return out;
}

nn::Matrix alarm_input(std::span<const GradientSequence> sequences) {
  if (sequences.empty()) return {};
  const Eigen::Index B = static_cast<Eigen::Index>(sequences.size());
  const int S = sequences.front().n_snapshots();
  const Eigen::Index P = static_cast<Eigen::Index>(sequences.front().n_params());
  nn::Matrix out(B * S, P);
  for (Eigen::Index b = 0; b < B; ++b) {
    const auto& seq = sequences[static_cast<std::size_t>(b)];
    if (seq.n_snapshots() != S || seq.grads.cols() != P)
      throw ConfigError("gradient sequences in one batch must share their shape");
    for (int s = 0; s < S; ++s) out.row(s * B + b) = seq.grads.row(s);
  }
  return out;
}

std::size_t estimate_cache_bytes(std::size_t n_samples, int n_snapshots, std::size_t n_params) {
  return n_samples * static_cast<std::size_t>(n_snapshots) * n_params * sizeof(double);
}

SequenceCache::SequenceCache(const ae::SnapshotFamily& family, nn::Matrix samples,
                             CachePolicy policy, std::size_t capacity_bytes)
    : family_(&family), samples_(std::move(samples)), policy_(policy) {
  if (family.size() == 0) throw UsageError("empty snapshot family");
  if (samples_.rows() > 0 && samples_.cols() != family.architecture().input_dim)
    throw ConfigError("samples do not match the autoencoder input dimension");
  if (policy_ != CachePolicy::PrecomputeAll) return;

  const std::size_t need = estimate_cache_bytes(size(), family.size(), family.param_count());
  log_info("gradient cache: " + std::to_string(size()) + " samples x " +
           std::to_string(family.size()) + " snapshots x " +
           std::to_string(family.param_count()) + " params = " + std::to_string(need) + " bytes");
  if (need > capacity_bytes)
    throw UsageError("gradient cache needs " + std::to_string(need) + " bytes but capacity is " +
                     std::to_string(capacity_bytes) + "; use the on_the_fly cache policy");

  const Eigen::Index P = static_cast<Eigen::Index>(family.param_count());
  per_step_.assign(static_cast<std::size_t>(family.size()), nn::Matrix(samples_.rows(), P));
  for (Eigen::Index i = 0; i < samples_.rows(); ++i) {
    const nn::Matrix row = samples_.row(i);
    for (int s = 0; s < family.size(); ++s) gradient_into(family, s, row, per_step_[s].row(i).data());
  }
}

std::size_t SequenceCache::bytes() const {
  std::size_t total = 0;
  for (const auto& m : per_step_) total += static_cast<std::size_t>(m.size()) * sizeof(double);
  return total;
}

GradientSequence SequenceCache::sequence(std::size_t i) const {
  if (i >= size()) throw UsageError("sample index out of range");
  if (policy_ == CachePolicy::OnTheFly) {
    const nn::Matrix row = samples_.row(static_cast<Eigen::Index>(i));
    return extract_sequence(*family_, std::span<const double>(row.data(), row.size()), i);
  }
  GradientSequence seq;
  seq.sample_id = i;
  seq.grads.resize(family_->size(), static_cast<Eigen::Index>(family_->param_count()));
  for (int s = 0; s < family_->size(); ++s) seq.grads.row(s) = per_step_[s].row(i);
  return seq;
}

nn::Matrix SequenceCache::gather(std::span<const std::size_t> indices) const {
  const Eigen::Index B = static_cast<Eigen::Index>(indices.size());
  const int S = family_->size();
  nn::Matrix out(B * S, static_cast<Eigen::Index>(family_->param_count()));
  for (Eigen::Index b = 0; b < B; ++b) {
    const std::size_t i = indices[static_cast<std::size_t>(b)];
    if (i >= size()) throw UsageError("sample index out of range");
    if (policy_ == CachePolicy::PrecomputeAll) {
      for (int s = 0; s < S; ++s) out.row(s * B + b) = per_step_[s].row(static_cast<Eigen::Index>(i));
    } else {
      const nn::Matrix row = samples_.row(static_cast<Eigen::Index>(i));
      for (int s = 0; s < S; ++s) gradient_into(*family_, s, row, out.row(s * B + b).data());
    }
  }
  return out;
}

std::vector<GradientSequence> extract_batch(const ae::SnapshotFamily& family,
                                            const nn::Matrix& samples, CachePolicy policy,
                                            std::size_t capacity_bytes) {
  std::vector<GradientSequence> out;
  if (samples.rows() == 0) return out;
  const SequenceCache cache(family, samples, policy, capacity_bytes);
  out.reserve(cache.size());
  for (std::size_t i = 0; i < cache.size(); ++i) out.push_back(cache.sequence(i));
  return out;
}

// ---------------------------------------------------------------- file

namespace {
constexpr char kMagic[8] = {'R', '2', 'A', 'D', '2', 'G', 'R', 'C'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u64(std::ostream& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}
std::uint64_t get_u(std::istream& in, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    const int c = in.get();
    if (c == EOF) throw IoError("gradient cache truncated");
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return v;
}
}  // namespace

void write_gradient_cache(const std::filesystem::path& path, const CacheKey& key,
                          std::span<const GradientSequence> sequences) {
  const int S = sequences.empty() ? 0 : sequences.front().n_snapshots();
  const std::size_t P = sequences.empty() ? 0 : sequences.front().n_params();
  nlohmann::json manifest = {{"dataset_fingerprint", key.dataset_fingerprint},
                             {"family_hash", key.family_hash},
                             {"n_samples", sequences.size()},
                             {"n_snapshots", S},
                             {"n_params", P}};
  const std::string text = manifest.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kMagic, sizeof kMagic);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& seq : sequences) {
    if (seq.n_snapshots() != S || seq.n_params() != P)
      throw ConfigError("gradient sequences in one cache must share their shape");
    put_u64(out, seq.sample_id);
    for (Eigen::Index i = 0; i < seq.grads.size(); ++i)
      put_u64(out, std::bit_cast<std::uint64_t>(seq.grads.data()[i]));
  }
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<GradientSequence> read_gradient_cache(const std::filesystem::path& path,
                                                  const CacheKey& expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  char magic[sizeof kMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw IoError("not a gradient cache file");
  if (get_u(in, 4) != kVersion) throw IoError("unsupported gradient cache version");
  std::string text(get_u(in, 4), '\0');
  in.read(text.data(), static_cast<std::streamsize>(text.size()));
  const auto manifest = nlohmann::json::parse(text);
  const CacheKey key{manifest.at("dataset_fingerprint").get<std::string>(),
                     manifest.at("family_hash").get<std::string>()};
  if (!(key == expected))
    throw IoError("gradient cache was computed for dataset " + key.dataset_fingerprint +
                  " / family " + key.family_hash);
  const auto n = manifest.at("n_samples").get<std::size_t>();
  const auto S = manifest.at("n_snapshots").get<Eigen::Index>();
  const auto P = manifest.at("n_params").get<Eigen::Index>();
  std::vector<GradientSequence> out(n);
  for (auto& seq : out) {
    seq.sample_id = get_u(in, 8);
    seq.grads.resize(S, P);
    for (Eigen::Index i = 0; i < seq.grads.size(); ++i)
      seq.grads.data()[i] = std::bit_cast<double>(get_u(in, 8));
  }
  return out;
}

}  // namespace r2ad2::gradseq
