#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "r2ad2/ae/target_ae.hpp"
#include "r2ad2/nn/tensor.hpp"

namespace r2ad2::gradseq {

/// Per-sample reconstruction-loss gradients, one row per snapshot in epoch
/// order, columns in FlatParams layout order.
struct GradientSequence {
  nn::Matrix grads;  // [n_snapshots x n_params]
  std::size_t sample_id = 0;

  int n_snapshots() const { return static_cast<int>(grads.rows()); }
  std::size_t n_params() const { return static_cast<std::size_t>(grads.cols()); }
};

/// Gradient of one sample's mean squared reconstruction error w.r.t. every
/// parameter of `net`, which must map its input space onto itself.
std::vector<double> sample_gradient(const nn::Network& net, std::span<const double> x);

/// Gradient of the sample's mean squared reconstruction error w.r.t. every
/// parameter of snapshot `snapshot_idx`. The snapshot is not modified.
std::vector<double> extract_gradient(const ae::SnapshotFamily& family, int snapshot_idx,
                                     std::span<const double> x);

GradientSequence extract_sequence(const ae::SnapshotFamily& family, std::span<const double> x,
                                  std::size_t sample_id = 0);

/// Step-major alarm input for a batch of samples: row s * B + b holds the
/// gradient of sample b at snapshot s. Shape [S*B x n_params].
nn::Matrix alarm_input(const ae::SnapshotFamily& family, const nn::Matrix& samples);
nn::Matrix alarm_input(std::span<const GradientSequence> sequences);

enum class CachePolicy { PrecomputeAll, OnTheFly };

inline constexpr std::size_t kDefaultCacheCapacity = std::size_t{2} << 30;

/// Bytes needed to hold every sequence: n_samples * n_snapshots * n_params * 8.
std::size_t estimate_cache_bytes(std::size_t n_samples, int n_snapshots, std::size_t n_params);

/// Gradient sequences for a fixed set of samples against a frozen family.
/// PrecomputeAll extracts everything up front (refusing when the estimate
/// exceeds the capacity); OnTheFly recomputes on every request. Both return
/// bit-identical values. The family must outlive the cache.
class SequenceCache {
 public:
  SequenceCache(const ae::SnapshotFamily& family, nn::Matrix samples, CachePolicy policy,
                std::size_t capacity_bytes = kDefaultCacheCapacity);

  std::size_t size() const { return static_cast<std::size_t>(samples_.rows()); }
  CachePolicy policy() const { return policy_; }
  std::size_t bytes() const;

  GradientSequence sequence(std::size_t i) const;
  /// Step-major alarm batch for the selected samples.
  nn::Matrix gather(std::span<const std::size_t> indices) const;

 private:
  const ae::SnapshotFamily* family_;
  nn::Matrix samples_;
  CachePolicy policy_;
  std::vector<nn::Matrix> per_step_;  // PrecomputeAll: [n_samples x P] per snapshot
};

std::vector<GradientSequence> extract_batch(const ae::SnapshotFamily& family,
                                            const nn::Matrix& samples, CachePolicy policy,
                                            std::size_t capacity_bytes = kDefaultCacheCapacity);

/// Identifies the inputs a gradient cache file was computed from.
struct CacheKey {
  std::string dataset_fingerprint;
  std::string family_hash;
  bool operator==(const CacheKey&) const = default;
};

void write_gradient_cache(const std::filesystem::path& path, const CacheKey& key,
                          std::span<const GradientSequence> sequences);
/// Throws IoError when the file's key differs from `expected`.
std::vector<GradientSequence> read_gradient_cache(const std::filesystem::path& path,
                                                  const CacheKey& expected);

}  // namespace r2ad2::gradseq
