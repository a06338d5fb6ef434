#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "r2ad2/alarm/alarm.hpp"
#include "r2ad2/data/dataset.hpp"
#include "r2ad2/error.hpp"
#include "r2ad2/eval/metrics.hpp"
#include "r2ad2/experiment/config.hpp"

namespace r2ad2::experiment {

inline const std::string kMethodR2AD2 = "r2ad2";
inline const std::string kMethodAE = "ae";
inline const std::string kMethodGradCon = "gradcon";
/// Scenario suffix of per-class rows: "<label>:class=<name>".
inline const std::string kPerClassTag = ":class=";

/// Splits for one run seed plus the identity of the source data.
struct PreparedData {
  data::Splits splits;
  int feature_dim = 0;
  std::string dataset_name;
  std::string fingerprint;
};

PreparedData prepare_data(const ExperimentConfig& config, std::uint64_t run_seed);

/// One (scenario, snapshot count) configuration evaluated for one seed.
struct CellSpec {
  std::string label;  // scenario column of the metric records
  data::ScenarioSpec scenario;
  int n_snapshots = 3;
  /// Extra per-class AUC/AP rows, scored against normals only.
  bool per_class = false;
};

struct CellResult {
  std::vector<eval::MetricRecord> records;
  double seconds = 0;
  std::size_t ae_params = 0;
  std::size_t alarm_params = 0;
};

/// Trained models of one cell, for callers that keep them.
struct TrainedModels {
  ae::SnapshotFamily family;
  alarm::AlarmModel alarm;
  data::ScenarioData scenario;
};

TrainedModels train_models(const ExperimentConfig& config, const PreparedData& prepared,
                           const data::ScenarioSpec& scenario, int n_snapshots,
                           std::uint64_t seed);

CellResult run_cell(const ExperimentConfig& config, const PreparedData& prepared,
                    const CellSpec& cell, std::uint64_t seed);

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct VerbResult {
  std::string verb;
  std::vector<eval::MetricRecord> records;
  std::vector<Check> checks;
  std::filesystem::path dir;  // empty on a dry run
  std::string plan;           // filled on a dry run
  bool all_passed() const;
};

struct RunOptions {
  bool dry_run = false;
  /// Write config.ini, metrics.jsonl, summary.csv, checks.txt and run.log.
  bool write_files = true;
};

VerbResult run_known(const ExperimentConfig& config, const RunOptions& options = {});
VerbResult run_pollution(const ExperimentConfig& config, const RunOptions& options = {});
VerbResult run_budget(const ExperimentConfig& config, const RunOptions& options = {});
VerbResult run_transfer(const ExperimentConfig& config, const RunOptions& options = {});
VerbResult run_ablation(const ExperimentConfig& config, const RunOptions& options = {});

/// Mean/std per (scenario, method), in first-appearance order.
std::vector<eval::MethodSummary> summarize(const std::vector<eval::MetricRecord>& records,
                                           std::vector<std::string>* scenarios = nullptr);
std::string summary_csv(const std::vector<eval::MetricRecord>& records);

/// Text report over metric records: per-scenario table plus paired Wilcoxon
/// tests of r2ad2 against each baseline when enough pairs exist.
std::string report(const std::vector<eval::MetricRecord>& records);
std::vector<eval::MetricRecord> read_metrics(const std::filesystem::path& jsonl);

/// Exclusive ownership of an output directory for the lifetime of the object.
class DirectoryLock {
 public:
  explicit DirectoryLock(const std::filesystem::path& dir);
  ~DirectoryLock();
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

 private:
  std::filesystem::path path_;
};

class LockedError : public IoError {
 public:
  using IoError::IoError;
};

/// Raises glibc's mmap and trim thresholds so the per-step temporaries of
/// alarm training are recycled instead of mapped and unmapped each time.
void tune_allocator();

}  // namespace r2ad2::experiment
