#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "r2ad2/nn/tensor.hpp"

namespace r2ad2::data {

struct LabeledSample {
  std::vector<double> features;  // in [0,1]
  int label = 0;                 // 0 normal, 1 anomalous
  std::string anomaly_class;     // empty when label == 0
  /// Audit tag: the true anomaly class. Equals anomaly_class on labelled
  /// anomalies, survives relabelling on polluting rows, empty for normals.
  std::string true_class;

  bool is_true_anomaly() const { return !true_class.empty(); }
  bool operator==(const LabeledSample&) const = default;
};

using Dataset = std::vector<LabeledSample>;

nn::Matrix features(const Dataset& d);
std::vector<int> labels(const Dataset& d);
/// Throws ConfigError when a sample breaks the LabeledSample invariants.
void validate(const Dataset& d);

/// Order-independent digest (hex). Empty sets share one constant.
std::string dataset_fingerprint(const Dataset& d);

// ------------------------------------------------------------------ splits

struct SplitSpec {
  double train_frac = 0.75;
  double val_frac = 0.05;
  double test_frac = 0.20;
  double ae_frac_of_train = 0.75;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Splits {
  Dataset ae_train_normals;   // label-0 rows of the AE partition
  Dataset heldback_normals;   // label-0 rows held back for the alarm
  Dataset train_anomalies;    // every training anomaly, either partition
  Dataset val;
  Dataset test;
};

struct SplitIndices {
  std::vector<std::size_t> ae, heldback, val, test;
};

/// Stratified by label: rows are shuffled within each label and interleaved
/// so every prefix holds each label in proportion, then cut at the rounded
/// split sizes.
SplitIndices split_indices(const std::vector<int>& labels, const SplitSpec& spec);
Splits make_splits(const Dataset& samples, const SplitSpec& spec);

// ---------------------------------------------------------------- scenario

struct ScenarioSpec {
  int known_anomaly_budget = 100;
  double pollution_rate = 0.0;
  bool pollute_heldback = true;
  /// Empty means every class.
  std::set<std::string> train_anomaly_classes;
  std::set<std::string> test_anomaly_classes;

  void validate() const;
};

struct ScenarioData {
  Dataset ae_train;          // label 0 (may hide polluting anomalies)
  Dataset heldback_normals;  // label 0 (may hide polluting anomalies)
  Dataset known_anomalies;   // exactly the budget, label 1
  Dataset val;
  Dataset test;
  std::size_t polluted_ae = 0;
  std::size_t polluted_heldback = 0;

  /// Labelled alarm-training rows: held-back normals + known anomalies, and
  /// the AE-training rows too when `include_ae_normals`.
  Dataset alarm_train(bool include_ae_normals) const;
};

ScenarioData apply_scenario(const Splits& splits, const ScenarioSpec& scenario,
                            std::uint64_t seed);

// --------------------------------------------------------------------- csv

/// Declarative column description, read from `key = value` lines:
///   label = <column>, positive = <v1,v2,...>, class = <column> (optional),
///   numeric = <c1,c2,...>, categorical = <c1,...>, ignore = <c1,...>
struct Schema {
  std::string label_column;
  std::set<std::string> positive_values;
  std::string class_column;
  std::vector<std::string> numeric;
  std::vector<std::string> categorical;
  std::set<std::string> ignore;
};

Schema parse_schema(const std::string& text);
Schema load_schema(const std::filesystem::path& path);

struct RawTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;
};

RawTable read_csv(std::istream& in);
RawTable read_csv(const std::filesystem::path& path);

/// Min-max scaling and one-hot encoding fitted on training rows only.
class Encoder {
 public:
  static Encoder fit(const RawTable& table, const Schema& schema,
                     const std::vector<std::size_t>& train_rows);
  LabeledSample transform(const RawTable& table, std::size_t row) const;
  int output_dim() const;
  /// Categorical values never seen in the training rows (encoded all-zero).
  std::size_t unknown_categories() const { return unknown_; }

 private:
  struct Numeric {
    std::size_t col;
    double lo, hi;
  };
  struct Categorical {
    std::size_t col;
    std::map<std::string, int> codes;
  };
  std::vector<Numeric> numeric_;
  std::vector<Categorical> categorical_;
  std::size_t label_col_ = 0;
  std::optional<std::size_t> class_col_;
  std::set<std::string> positive_;
  mutable std::size_t unknown_ = 0;
};

struct LoadedCsv {
  Splits splits;
  int feature_dim = 0;
  std::size_t unknown_categories = 0;
};

/// Reads, splits, fits the encoder on the training split, encodes all rows.
LoadedCsv load_csv(const std::filesystem::path& path, const Schema& schema,
                   const SplitSpec& spec);

/// Processed samples as CSV: f0..f{N-1}, label, anomaly_class, true_class.
void write_samples_csv(const Dataset& d, const std::filesystem::path& path);
Dataset read_samples_csv(const std::filesystem::path& path);

// --------------------------------------------------------------- synthetic

struct SyntheticSpec {
  std::string name = "blobs";  // blobs | blobs-2class | rings
  int n_normals = 5000;
  int n_anomalies = 2500;
  int dim = 8;
  std::uint64_t seed = 0;
  double blob_std = 0.05;     // per-feature spread of each blob
  double shell_inner = 5.0;   // shell anomalies lie this many blob_std ...
  double shell_outer = 8.0;   // ... up to this many from a blob centre
};

std::vector<std::string> synthetic_names();
Dataset make_synthetic(const SyntheticSpec& spec);

}  // namespace r2ad2::data
