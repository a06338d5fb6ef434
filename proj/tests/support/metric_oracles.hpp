#pragma once

// Brute-force reference implementations used only by tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

namespace r2ad2::testing {

// Counts every (anomaly, normal) pair; ties count one half.
inline double brute_auc(const std::vector<int>& y, const std::vector<double>& s) {
  double wins = 0, pairs = 0;
  for (std::size_t i = 0; i < y.size(); ++i)
    for (std::size_t j = 0; j < y.size(); ++j)
      if (y[i] == 1 && y[j] == 0) {
        pairs += 1;
        if (s[i] > s[j]) wins += 1;
        else if (s[i] == s[j]) wins += 0.5;
      }
  return wins / pairs;
}

// Walks thresholds from the top score down; precision and recall at every
// cut that adds a positive. Distinct scores only.
inline double brute_ap(const std::vector<int>& y, const std::vector<double>& s) {
  const double n_pos = static_cast<double>(std::count(y.begin(), y.end(), 1));
  std::vector<double> thresholds = s;
  std::sort(thresholds.rbegin(), thresholds.rend());
  double prev_recall = 0, ap = 0;
  for (double t : thresholds) {
    double tp = 0, predicted = 0;
    for (std::size_t i = 0; i < y.size(); ++i)
      if (s[i] >= t) {
        predicted += 1;
        tp += y[i];
      }
    const double recall = tp / n_pos;
    ap += (recall - prev_recall) * (tp / predicted);
    prev_recall = recall;
  }
  return ap;
}

// Two-sided signed-rank p by listing all 2^n sign assignments.
inline double enumerate_wilcoxon(const std::vector<double>& d) {
  const std::size_t n = d.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return std::abs(d[a]) < std::abs(d[b]); });
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && std::abs(d[idx[j + 1]]) == std::abs(d[idx[i]])) ++j;
    for (std::size_t k = i; k <= j; ++k) rank[idx[k]] = 0.5 * double(i + j + 2);
    i = j + 1;
  }
  double observed = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (d[i] > 0) observed += rank[i];
  double le = 0, ge = 0;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    double w = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask >> i & 1) w += rank[i];
    if (w <= observed + 1e-9) le += 1;
    if (w >= observed - 1e-9) ge += 1;
  }
  const double total = std::ldexp(1.0, static_cast<int>(n));
  return std::min(1.0, 2 * std::min(le, ge) / total);
}

}  // namespace r2ad2::testing
