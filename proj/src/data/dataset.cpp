#include "r2ad2/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "r2ad2/error.hpp"
#include "r2ad2/hash.hpp"
#include "r2ad2/log.hpp"

namespace r2ad2::data {

nn::Matrix features(const Dataset& d) {
  if (d.empty()) return {};
  const auto dim = static_cast<Eigen::Index>(d.front().features.size());
  nn::Matrix x(static_cast<Eigen::Index>(d.size()), dim);
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (static_cast<Eigen::Index>(d[i].features.size()) != dim)
      throw ConfigError("samples have differing feature counts");
    x.row(static_cast<Eigen::Index>(i)) = nn::ConstVectorMap(d[i].features.data(), dim).transpose();
  }
  return x;
}

std::vector<int> labels(const Dataset& d) {
  std::vector<int> y;
  y.reserve(d.size());
  for (const auto& s : d) y.push_back(s.label);
  return y;
}

void validate(const Dataset& d) {
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto& s = d[i];
    if (s.label != 0 && s.label != 1) throw ConfigError("row " + std::to_string(i) + ": bad label");
    if (s.label == 0 && !s.anomaly_class.empty())
      throw ConfigError("row " + std::to_string(i) + ": normal row carries an anomaly class");
    if (s.label == 1 && (s.anomaly_class.empty() || s.true_class != s.anomaly_class))
      throw ConfigError("row " + std::to_string(i) + ": anomaly without a matching class tag");
    for (double v : s.features)
      if (!std::isfinite(v)) throw ConfigError("row " + std::to_string(i) + ": non-finite feature");
  }
}

std::string dataset_fingerprint(const Dataset& d) {
  std::uint64_t sum = 0;
  for (const auto& s : d) {
    Hasher h;
    h.f64s(s.features).u64(static_cast<std::uint64_t>(s.label)).str(s.anomaly_class).str(s.true_class);
    sum += h.digest();
  }
  return to_hex(Hasher{}.u64(d.size()).u64(sum).digest());
}

// ------------------------------------------------------------------ splits

void SplitSpec::validate() const {
  for (double f : {train_frac, val_frac, test_frac})
    if (!(f >= 0.0 && f <= 1.0)) throw ConfigError("split fractions must lie in [0,1]");
  if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9)
    throw ConfigError("split fractions must sum to 1");
  if (!(ae_frac_of_train > 0.0 && ae_frac_of_train < 1.0))
    throw ConfigError("ae_frac_of_train must lie in (0,1)");
}

SplitIndices split_indices(const std::vector<int>& labels, const SplitSpec& spec) {
  spec.validate();
  const std::size_t n = labels.size();
  std::mt19937_64 rng(derive_seed(spec.seed, "split"));

  // Shuffle each label's rows, then order all rows by their relative rank
  // inside their stratum so any prefix is close to stratified.
  std::map<int, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < n; ++i) strata[labels[i]].push_back(i);
  struct Keyed {
    double key;
    int label;
    std::size_t row;
  };
  std::vector<Keyed> keyed;
  keyed.reserve(n);
  for (auto& [label, rows] : strata) {
    std::shuffle(rows.begin(), rows.end(), rng);
    for (std::size_t r = 0; r < rows.size(); ++r)
      keyed.push_back({(static_cast<double>(r) + 0.5) / static_cast<double>(rows.size()), label,
                       rows[r]});
  }
  std::sort(keyed.begin(), keyed.end(), [](const Keyed& a, const Keyed& b) {
    return a.key != b.key ? a.key < b.key : a.label < b.label;
  });

  const auto n_train = static_cast<std::size_t>(std::llround(spec.train_frac * double(n)));
  const auto n_val = std::min(n - n_train, static_cast<std::size_t>(std::llround(spec.val_frac * double(n))));
  const auto n_ae = static_cast<std::size_t>(std::llround(spec.ae_frac_of_train * double(n_train)));
  if (n_train == 0 || n - n_train - n_val == 0 || n_ae == 0 || n_ae == n_train ||
      (spec.val_frac > 0 && n_val == 0))
    throw UsageError("too few samples (" + std::to_string(n) + ") for the requested splits");

  SplitIndices out;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t row = keyed[i].row;
    if (i < n_ae) out.ae.push_back(row);
    else if (i < n_train) out.heldback.push_back(row);
    else if (i < n_train + n_val) out.val.push_back(row);
    else out.test.push_back(row);
  }
  return out;
}

Splits make_splits(const Dataset& samples, const SplitSpec& spec) {
  const SplitIndices idx = split_indices(labels(samples), spec);
  Splits s;
  for (std::size_t i : idx.ae) {
    if (samples[i].label == 0) s.ae_train_normals.push_back(samples[i]);
    else s.train_anomalies.push_back(samples[i]);
  }
  for (std::size_t i : idx.heldback) {
    if (samples[i].label == 0) s.heldback_normals.push_back(samples[i]);
    else s.train_anomalies.push_back(samples[i]);
  }
  for (std::size_t i : idx.val) s.val.push_back(samples[i]);
  for (std::size_t i : idx.test) s.test.push_back(samples[i]);
  return s;
}

// ---------------------------------------------------------------- scenario

void ScenarioSpec::validate() const {
  if (known_anomaly_budget < 0) throw ConfigError("known_anomaly_budget must be non-negative");
  if (!(pollution_rate >= 0.0 && pollution_rate < 1.0))
    throw ConfigError("pollution_rate must lie in [0,1)");
  if (!test_anomaly_classes.empty())
    for (const auto& c : train_anomaly_classes)
      if (!test_anomaly_classes.contains(c))
        throw ConfigError("train anomaly class '" + c + "' is not among the test classes");
}

Dataset ScenarioData::alarm_train(bool include_ae_normals) const {
  Dataset out = heldback_normals;
  if (include_ae_normals) out.insert(out.end(), ae_train.begin(), ae_train.end());
  out.insert(out.end(), known_anomalies.begin(), known_anomalies.end());
  return out;
}

namespace {
bool class_allowed(const std::set<std::string>& allowed, const std::string& c) {
  return allowed.empty() || allowed.contains(c);
}

// Replaces `count` random rows of `normals` by anomalies taken from the back
// of `pool`, relabelled 0 with their true class kept for audit.
void pollute(Dataset& normals, std::size_t count, std::vector<LabeledSample>& pool,
             std::mt19937_64& rng) {
  std::vector<std::size_t> rows(normals.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  std::shuffle(rows.begin(), rows.end(), rng);
  for (std::size_t k = 0; k < count; ++k) {
    LabeledSample s = std::move(pool.back());
    pool.pop_back();
    s.label = 0;
    s.anomaly_class.clear();
    normals[rows[k]] = std::move(s);
  }
}
}  // namespace

ScenarioData apply_scenario(const Splits& splits, const ScenarioSpec& scenario,
                            std::uint64_t seed) {
  scenario.validate();
  if (scenario.pollution_rate > 0.1)
    log_warn("pollution rate " + std::to_string(scenario.pollution_rate) +
             " exceeds the studied range [0, 0.1]");
  std::mt19937_64 rng(derive_seed(seed, "scenario"));

  std::vector<LabeledSample> pool;
  for (const auto& s : splits.train_anomalies)
    if (class_allowed(scenario.train_anomaly_classes, s.anomaly_class)) pool.push_back(s);
  std::shuffle(pool.begin(), pool.end(), rng);

  const auto budget = static_cast<std::size_t>(scenario.known_anomaly_budget);
  if (budget > pool.size())
    throw UsageError("known-anomaly budget " + std::to_string(budget) + " exceeds the " +
                     std::to_string(pool.size()) + " training anomalies available");

  ScenarioData out;
  out.known_anomalies.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(budget));
  pool.erase(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(budget));
  std::reverse(pool.begin(), pool.end());  // pollution draws from the back

  out.ae_train = splits.ae_train_normals;
  out.heldback_normals = splits.heldback_normals;
  out.polluted_ae = static_cast<std::size_t>(
      std::llround(scenario.pollution_rate * static_cast<double>(out.ae_train.size())));
  out.polluted_heldback =
      scenario.pollute_heldback
          ? static_cast<std::size_t>(std::llround(scenario.pollution_rate *
                                                  static_cast<double>(out.heldback_normals.size())))
          : 0;
  if (out.polluted_ae + out.polluted_heldback > pool.size())
    throw UsageError("pollution needs " + std::to_string(out.polluted_ae + out.polluted_heldback) +
                     " anomalies but only " + std::to_string(pool.size()) +
                     " remain after the known-anomaly budget");
  pollute(out.ae_train, out.polluted_ae, pool, rng);
  pollute(out.heldback_normals, out.polluted_heldback, pool, rng);

  for (const auto& s : splits.val)
    if (s.label == 0 || class_allowed(scenario.test_anomaly_classes, s.anomaly_class))
      out.val.push_back(s);
  for (const auto& s : splits.test)
    if (s.label == 0 || class_allowed(scenario.test_anomaly_classes, s.anomaly_class))
      out.test.push_back(s);
  return out;
}

}  // namespace r2ad2::data
