#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "r2ad2/ae/target_ae.hpp"

namespace r2ad2::eval {

/// Probability that a random anomaly outscores a random normal, ties ½.
double auc_roc(std::span<const int> labels, std::span<const double> scores);

/// Sum over the score-descending ranking of (R_k - R_{k-1}) P_k. Tied scores
/// are ordered by a seeded shuffle of the input, then stably.
double average_precision(std::span<const int> labels, std::span<const double> scores,
                         std::uint64_t tie_seed = 0);

struct WilcoxonResult {
  double p_value = 1.0;
  double w_plus = 0.0;  // rank sum of positive differences
  int n = 0;            // non-zero differences
  bool exact = false;
};

/// Two-sided signed-rank test on a - b. Exact for n <= 12, normal
/// approximation with tie and continuity correction above.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b);

inline constexpr int kWilcoxonExactMax = 12;
inline constexpr int kWilcoxonMinPairs = 5;

/// Cosine-similarity detector on the final snapshot: one minus the mean,
/// over layers, of the cosine between the sample's gradient and the average
/// normal gradient. A reimplementation in the spirit of GradCon, not a
/// faithful reproduction.
class GradConScorer {
 public:
  static GradConScorer fit(const ae::SnapshotFamily& family, const nn::Matrix& train_normals);

  double score(std::span<const double> x) const;
  std::vector<double> scores(const nn::Matrix& x) const;
  /// Layer terms that fell back to dissimilarity 1 because a norm was zero.
  std::size_t zero_norm_terms() const { return zero_norm_; }
  const std::vector<double>& reference() const { return reference_; }

 private:
  double score_gradient(std::span<const double> g) const;

  const nn::Network* net_ = nullptr;
  std::vector<double> reference_;
  std::vector<std::pair<std::size_t, std::size_t>> layer_ranges_;  // [begin, end)
  mutable std::size_t zero_norm_ = 0;
};

struct MethodSummary {
  std::string method;
  std::vector<std::uint64_t> seeds;
  std::vector<double> auc, ap;
  double auc_mean = 0, auc_std = 0, ap_mean = 0, ap_std = 0;
};

inline constexpr int kDefaultRuns = 5;

/// Sample mean and (n-1) standard deviation; std is 0 for a single value.
std::pair<double, double> mean_std(std::span<const double> v);

/// Runs scoring_fn once per seed and summarises AUC and AP.
MethodSummary evaluate_method(const std::string& method,
                              const std::function<std::vector<double>(std::uint64_t)>& scoring_fn,
                              std::span<const int> labels, std::span<const std::uint64_t> seeds);

struct MetricRecord {
  std::string method, dataset, scenario;
  std::uint64_t seed = 0;
  double auc = 0, ap = 0;
  std::string dataset_fingerprint, family_hash, alarm_hash;

  bool operator==(const MetricRecord&) const = default;
};

/// One JSON object, keys in fixed order, no trailing newline.
std::string to_json_line(const MetricRecord& r);
MetricRecord parse_json_line(const std::string& line);

}  // namespace r2ad2::eval
