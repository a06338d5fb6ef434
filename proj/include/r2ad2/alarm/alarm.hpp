#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "r2ad2/ae/target_ae.hpp"
#include "r2ad2/gradseq/gradient_sequence.hpp"
#include "r2ad2/nn/network.hpp"

namespace r2ad2::alarm {

/// Time-distributed batch norm, then `n_recurrent` LSTM layers, then ReLU
/// dense layers on the last hidden state, then one output unit. With a
/// single snapshot the LSTM layers become ReLU dense layers of equal width.
struct AlarmArchitecture {
  int input_dim = 0;  // AE parameter count
  std::vector<int> layer_dims{100, 50, 25, 10};
  int n_recurrent = 2;

  static std::vector<int> full_scale_dims() { return {1000, 500, 200, 75}; }

  void validate(int n_snapshots) const;
  /// The final dense layer is linear; the sigmoid is applied by score().
  std::vector<nn::LayerSpec> layers(int n_snapshots) const;
  bool operator==(const AlarmArchitecture&) const = default;
};

/// i.i.d. N(mean, stddev) draws per feature, not clipped.
class SyntheticAnomalySampler {
 public:
  SyntheticAnomalySampler(int dim, std::uint64_t seed, double mean = 0.5, double stddev = 1.0);
  nn::Matrix sample(int batch_size);
  int dim() const { return dim_; }

 private:
  int dim_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> dist_;
};

/// How the synthetic batch is normalised by the input batch-norm layer.
/// Neither option lets synthetic data touch running statistics or gamma/beta.
enum class SyntheticNorm {
  BatchStatistics,    // normalise with the synthetic batch's own statistics
  RunningStatistics,  // normalise with the running (real-data) statistics
};

struct TrainSet {
  nn::Matrix features;      // samples in AE input space
  std::vector<int> labels;  // 0 normal, 1 anomalous
};

struct AlarmTrainOptions {
  int epochs = 100;
  double lr = 0.001;
  int batch_size = 64;  // real samples per step; as many synthetic samples again
  bool oversample_anomalies = true;
  SyntheticNorm synthetic_norm = SyntheticNorm::RunningStatistics;
  nn::BatchNormSettings bn{};
  gradseq::CachePolicy cache_policy = gradseq::CachePolicy::PrecomputeAll;
  std::size_t cache_capacity = gradseq::kDefaultCacheCapacity;
  /// Deliberately wrong path: synthetic batches also update the batch-norm
  /// running statistics. Only for demonstrating the freeze contract.
  bool synthetic_updates_bn_stats = false;
};

/// Per-step hook: the step index and the train-set rows of the real batch.
using BatchObserver = std::function<void(int step, std::span<const std::size_t> rows)>;

struct TrainingHistory {
  std::vector<double> real_loss;       // per epoch, mean BXE on real samples
  std::vector<double> synthetic_loss;  // per epoch, mean BXE(1, p~)
  int steps = 0;
};

struct AlarmModel {
  AlarmArchitecture arch;
  int n_snapshots = 0;
  nn::Network net;
  std::string family_hash;  // hex manifest hash of the family it was trained on
  TrainingHistory history;

  std::uint64_t hash() const;
};

/// Output units zeroed: every score is 0.5.
AlarmModel untrained_alarm(const AlarmArchitecture& arch, const ae::SnapshotFamily& family,
                           std::uint64_t seed);

AlarmModel train_alarm(const AlarmArchitecture& arch, const ae::SnapshotFamily& family,
                       const TrainSet& train_set, std::uint64_t seed,
                       const AlarmTrainOptions& options = {},
                       const BatchObserver& observer = nullptr);

double score(const AlarmModel& alarm, const gradseq::GradientSequence& seq);
/// Scores for a step-major batch [S*B x P].
std::vector<double> score_batch(const AlarmModel& alarm, const nn::Matrix& step_major);
double score_input(const AlarmModel& alarm, const ae::SnapshotFamily& family,
                   std::span<const double> x);
std::vector<double> score_inputs(const AlarmModel& alarm, const ae::SnapshotFamily& family,
                                 const nn::Matrix& x);

/// Directory layout: alarm.ckpt plus alarm.json binding it to a family hash.
void save_alarm(const AlarmModel& alarm, const std::filesystem::path& dir);
/// Throws ConfigError when `family` is not the one the alarm was trained on.
AlarmModel load_alarm(const std::filesystem::path& dir, const ae::SnapshotFamily& family);

}  // namespace r2ad2::alarm
