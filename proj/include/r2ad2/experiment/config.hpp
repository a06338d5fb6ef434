#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "r2ad2/ae/target_ae.hpp"
#include "r2ad2/alarm/alarm.hpp"
#include "r2ad2/data/dataset.hpp"

namespace r2ad2::experiment {

struct DataConfig {
  /// Builtin generator name; empty when a CSV file is used.
  std::string synthetic = "blobs";
  std::filesystem::path csv;
  std::filesystem::path schema;
  data::SyntheticSpec generator;  // name is taken from `synthetic`

  std::string display_name() const;
};

enum class ChecksMode { Auto, On, Off };

/// Thresholds of the per-verb benchmark checks.
struct CheckConfig {
  ChecksMode mode = ChecksMode::Auto;  // Auto: on for builtin synthetic data
  double known_min_auc = 0.95;
  double pollution_max_drop = 0.08;
  double ablation_tolerance = 0.02;
  double transfer_min_auc = 0.70;
};

struct ExperimentConfig {
  std::string name = "experiment";
  DataConfig data;
  data::SplitSpec split;
  /// Draw fresh splits for every run seed (seed derived from split.seed and the run seed).
  bool resplit_per_run = true;
  data::ScenarioSpec scenario;
  bool include_ae_normals = false;

  std::vector<int> encoder_dims{6, 4};
  ae::Schedule schedule;
  ae::TrainOptions ae_train;

  std::vector<int> alarm_dims{100, 50, 25, 10};
  int alarm_recurrent = 2;
  alarm::AlarmTrainOptions alarm_train;

  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::filesystem::path output = "runs";
  bool baselines = true;

  std::vector<double> pollution_rates{0.0, 0.01, 0.05, 0.1};
  std::vector<int> budgets{10, 25, 50, 100, 200};
  std::vector<int> step_counts{1, 2, 3, 4};
  CheckConfig checks;

  /// Throws ConfigError naming the offending key.
  void validate() const;
  bool checks_enabled() const;
};

/// INI text with sections; see docs/config-format.md.
ExperimentConfig parse_config(const std::string& text,
                              const std::vector<std::string>& overrides = {});
ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::vector<std::string>& overrides = {});
/// Canonical text: every key, fixed order, shortest round-trip numbers.
/// parse_config(to_text(c)) == c.
std::string to_text(const ExperimentConfig& config);

/// Applies `section.key=value` overrides to an existing config.
ExperimentConfig with_overrides(const ExperimentConfig& config,
                                const std::vector<std::string>& overrides);

/// Resolves a relative output directory under $R2AD2_OUTPUT_ROOT when set.
std::filesystem::path resolve_output(const std::filesystem::path& output);

inline constexpr const char* kOutputRootEnv = "R2AD2_OUTPUT_ROOT";

std::string format_number(double v);

}  // namespace r2ad2::experiment
