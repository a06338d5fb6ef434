#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "r2ad2/nn/network.hpp"

namespace r2ad2::ae {

/// Symmetric dense autoencoder: ReLU hidden layers, sigmoid reconstruction.
/// The decoder mirrors encoder_dims (untied weights).
struct AEArchitecture {
  int input_dim = 0;
  std::vector<int> encoder_dims;

  void validate() const;
  std::vector<nn::LayerSpec> layers() const;
  bool operator==(const AEArchitecture&) const = default;
};

/// Snapshot j is taken after t0 + j * t epochs.
struct Schedule {
  int t0 = 10;
  int t = 5;
  int n_snapshots = 3;

  void validate() const;
  int epoch_of(int j) const { return t0 + j * t; }
  int total_epochs() const { return epoch_of(n_snapshots - 1); }
  std::vector<int> epochs() const;
};

struct TrainOptions {
  int batch_size = 256;
  double lr = 0.001;
};

/// Ordered parameter states of one autoencoder taken during a single
/// training run. Snapshots are immutable once emitted.
class SnapshotFamily {
 public:
  SnapshotFamily() = default;
  SnapshotFamily(AEArchitecture arch, Schedule schedule, TrainOptions options, std::uint64_t seed,
                 std::vector<nn::Network> snapshots);

  const AEArchitecture& architecture() const { return arch_; }
  const Schedule& schedule() const { return schedule_; }
  const TrainOptions& options() const { return options_; }
  std::uint64_t seed() const { return seed_; }
  int size() const { return static_cast<int>(snapshots_.size()); }
  std::size_t param_count() const;

  /// Range-checked.
  const nn::Network& snapshot(int j) const;
  const nn::Network& last() const { return snapshot(size() - 1); }

  /// Epochs executed while training (t0 + (n-1) t for a trained family).
  int epochs_run() const { return epochs_run_; }
  const std::vector<double>& epoch_losses() const { return epoch_losses_; }

  const std::string& dataset_fingerprint() const { return dataset_fingerprint_; }
  void set_dataset_fingerprint(std::string fp) { dataset_fingerprint_ = std::move(fp); }

  /// Canonical JSON text of the manifest (sorted keys).
  std::string manifest_text() const;
  /// Digest of manifest_text(); covers every snapshot's parameter hash.
  std::uint64_t manifest_hash() const;

 private:
  friend SnapshotFamily train_target_family(const AEArchitecture&, const nn::Matrix&,
                                            const Schedule&, std::uint64_t, const TrainOptions&);
  AEArchitecture arch_;
  Schedule schedule_;
  TrainOptions options_;
  std::uint64_t seed_ = 0;
  std::vector<nn::Network> snapshots_;
  int epochs_run_ = 0;
  std::vector<double> epoch_losses_;
  std::string dataset_fingerprint_;
};

/// Minimises per-feature MSE on `normals` with Adam for the scheduled epochs,
/// re-shuffling every epoch with a seed derived from (seed, epoch).
SnapshotFamily train_target_family(const AEArchitecture& arch, const nn::Matrix& normals,
                                   const Schedule& schedule, std::uint64_t seed,
                                   const TrainOptions& options = {});

nn::Matrix reconstruct(const SnapshotFamily& family, int snapshot_idx, const nn::Matrix& x);

/// Mean squared reconstruction error of the final snapshot, per row.
std::vector<double> reconstruction_scores(const SnapshotFamily& family, const nn::Matrix& x);
double reconstruction_score(const SnapshotFamily& family, std::span<const double> x);

/// Directory layout: manifest.json plus snapshot_<j>.ckpt per snapshot.
void save_family(const SnapshotFamily& family, const std::filesystem::path& dir);
SnapshotFamily load_family(const std::filesystem::path& dir);

}  // namespace r2ad2::ae
