#include "r2ad2/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <map>
#include <random>

#include "json.hpp"
#include "r2ad2/error.hpp"
#include "r2ad2/gradseq/gradient_sequence.hpp"
#include "r2ad2/log.hpp"

namespace r2ad2::eval {

namespace {
void check_scored(std::span<const int> labels, std::span<const double> scores) {
  if (labels.size() != scores.size()) throw UsageError("labels and scores differ in length");
  const auto pos = std::count(labels.begin(), labels.end(), 1);
  const auto neg = std::count(labels.begin(), labels.end(), 0);
  if (pos + neg != static_cast<std::ptrdiff_t>(labels.size()))
    throw UsageError("labels must be 0 or 1");
  if (pos == 0 || neg == 0) throw UsageError("metric needs both classes in the test set");
  for (double s : scores)
    if (std::isnan(s)) throw NumericError("NaN score");
}

// 1-based ranks of `values`, ties sharing their average rank.
std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return values[a] < values[b]; });
  std::vector<double> rank(values.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && values[idx[j + 1]] == values[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j + 2);
    for (std::size_t k = i; k <= j; ++k) rank[idx[k]] = r;
    i = j + 1;
  }
  return rank;
}
}  // namespace

double auc_roc(std::span<const int> labels, std::span<const double> scores) {
  check_scored(labels, scores);
  const auto rank = average_ranks(scores);
  double n_pos = 0, rank_sum = 0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == 1) {
      n_pos += 1;
      rank_sum += rank[i];
    }
  const double n_neg = static_cast<double>(labels.size()) - n_pos;
  // Mann-Whitney U counts each tied pair as one half.
  const double u = rank_sum - n_pos * (n_pos + 1) / 2;
  return u / (n_pos * n_neg);
}

double average_precision(std::span<const int> labels, std::span<const double> scores,
                         std::uint64_t tie_seed) {
  check_scored(labels, scores);
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(tie_seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
  const double n_pos = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
  double hits = 0, ap = 0;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (labels[idx[k]] != 1) continue;
    hits += 1;
    ap += hits / static_cast<double>(k + 1);
  }
  return ap / n_pos;
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw UsageError("Wilcoxon needs paired samples of equal length");
  std::vector<double> d;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) d.push_back(a[i] - b[i]);

  WilcoxonResult r;
  r.n = static_cast<int>(d.size());
  if (d.empty()) {
    log_warn("Wilcoxon: all differences are zero; p = 1");
    return r;
  }
  if (r.n < kWilcoxonMinPairs)
    throw UsageError("Wilcoxon needs at least " + std::to_string(kWilcoxonMinPairs) +
                     " non-zero differences, got " + std::to_string(r.n));

  std::vector<double> mag(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) mag[i] = std::abs(d[i]);
  const auto rank = average_ranks(mag);
  for (std::size_t i = 0; i < d.size(); ++i)
    if (d[i] > 0) r.w_plus += rank[i];

  const double n = r.n;
  if (r.n <= kWilcoxonExactMax) {
    // Doubled ranks are integers even with ties; count sign assignments per sum.
    std::vector<int> twice(d.size());
    int total = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      twice[i] = static_cast<int>(std::lround(2 * rank[i]));
      total += twice[i];
    }
    std::vector<double> count(static_cast<std::size_t>(total) + 1, 0.0);
    count[0] = 1;
    for (int t : twice)
      for (int s = total; s >= t; --s) count[s] += count[s - t];
    const int w = static_cast<int>(std::lround(2 * r.w_plus));
    double lower = 0, upper = 0;
    for (int s = 0; s <= total; ++s) {
      if (s <= w) lower += count[s];
      if (s >= w) upper += count[s];
    }
    const double all = std::ldexp(1.0, r.n);
    r.p_value = std::min(1.0, 2 * std::min(lower, upper) / all);
    r.exact = true;
    return r;
  }

  std::map<double, int> ties;
  for (double m : mag) ++ties[m];
  double tie_term = 0;
  for (const auto& [_, t] : ties) tie_term += double(t) * t * t - t;
  const double mean = n * (n + 1) / 4;
  const double var = n * (n + 1) * (2 * n + 1) / 24 - tie_term / 48;
  if (var <= 0) return r;
  const double z = std::max(0.0, std::abs(r.w_plus - mean) - 0.5) / std::sqrt(var);
  r.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  return r;
}

// ------------------------------------------------------------------ gradcon

GradConScorer GradConScorer::fit(const ae::SnapshotFamily& family,
                                 const nn::Matrix& train_normals) {
  if (train_normals.rows() == 0) throw UsageError("GradCon needs training normals");
  GradConScorer s;
  s.net_ = &family.last();
  const auto& layout = s.net_->params().layout;
  for (std::size_t b = 0; b < layout.size();) {
    std::size_t e = b;
    while (e < layout.size() && layout[e].layer_id == layout[b].layer_id) ++e;
    s.layer_ranges_.emplace_back(layout[b].offset, layout[e - 1].offset + layout[e - 1].size());
    b = e;
  }
  s.reference_.assign(s.net_->param_count(), 0.0);
  for (Eigen::Index i = 0; i < train_normals.rows(); ++i) {
    const nn::Matrix row = train_normals.row(i);
    const auto g = gradseq::sample_gradient(*s.net_, {row.data(), std::size_t(row.cols())});
    for (std::size_t k = 0; k < g.size(); ++k) s.reference_[k] += g[k];
  }
  for (double& v : s.reference_) v /= static_cast<double>(train_normals.rows());
  return s;
}

double GradConScorer::score_gradient(std::span<const double> g) const {
  double dissimilarity = 0;
  for (const auto& [b, e] : layer_ranges_) {
    double dot = 0, ng = 0, nr = 0;
    for (std::size_t k = b; k < e; ++k) {
      dot += g[k] * reference_[k];
      ng += g[k] * g[k];
      nr += reference_[k] * reference_[k];
    }
    if (ng == 0 || nr == 0) {
      ++zero_norm_;
      dissimilarity += 1.0;
    } else {
      dissimilarity += 1.0 - std::clamp(dot / std::sqrt(ng * nr), -1.0, 1.0);
    }
  }
  return dissimilarity / static_cast<double>(layer_ranges_.size());
}

double GradConScorer::score(std::span<const double> x) const {
  return score_gradient(gradseq::sample_gradient(*net_, x));
}

std::vector<double> GradConScorer::scores(const nn::Matrix& x) const {
  const std::size_t before = zero_norm_;
  std::vector<double> out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const nn::Matrix row = x.row(i);
    out[i] = score({row.data(), std::size_t(row.cols())});
  }
  if (zero_norm_ > before)
    log_warn("GradCon: " + std::to_string(zero_norm_ - before) +
             " layer terms had a zero-norm gradient and scored as dissimilar");
  return out;
}

// --------------------------------------------------------------- summaries

std::pair<double, double> mean_std(std::span<const double> v) {
  if (v.empty()) return {0.0, 0.0};
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  if (v.size() == 1) return {mean, 0.0};
  double ss = 0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1))};
}

MethodSummary evaluate_method(const std::string& method,
                              const std::function<std::vector<double>(std::uint64_t)>& scoring_fn,
                              std::span<const int> labels, std::span<const std::uint64_t> seeds) {
  std::vector<std::uint64_t> sorted(seeds.begin(), seeds.end());
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw ConfigError("evaluation seeds must be distinct");
  MethodSummary s;
  s.method = method;
  for (std::uint64_t seed : seeds) {
    const auto scores = scoring_fn(seed);
    s.seeds.push_back(seed);
    s.auc.push_back(auc_roc(labels, scores));
    s.ap.push_back(average_precision(labels, scores, seed));
  }
  std::tie(s.auc_mean, s.auc_std) = mean_std(s.auc);
  std::tie(s.ap_mean, s.ap_std) = mean_std(s.ap);
  return s;
}

std::string to_json_line(const MetricRecord& r) {
  nlohmann::ordered_json j;
  j["method"] = r.method;
  j["dataset"] = r.dataset;
  j["scenario"] = r.scenario;
  j["seed"] = r.seed;
  j["auc"] = r.auc;
  j["ap"] = r.ap;
  j["dataset_fingerprint"] = r.dataset_fingerprint;
  j["family_hash"] = r.family_hash;
  j["alarm_hash"] = r.alarm_hash;
  return j.dump();
}

MetricRecord parse_json_line(const std::string& line) {
  const auto j = nlohmann::json::parse(line);
  return {j.at("method").get<std::string>(),
          j.at("dataset").get<std::string>(),
          j.at("scenario").get<std::string>(),
          j.at("seed").get<std::uint64_t>(),
          j.at("auc").get<double>(),
          j.at("ap").get<double>(),
          j.at("dataset_fingerprint").get<std::string>(),
          j.at("family_hash").get<std::string>(),
          j.at("alarm_hash").get<std::string>()};
}

}  // namespace r2ad2::eval
