#include <random>

#include "../support/metric_oracles.hpp"
#include "doctest.h"
#include "r2ad2/error.hpp"
#include "r2ad2/eval/metrics.hpp"
#include "r2ad2/log.hpp"

using namespace r2ad2;
using namespace r2ad2::eval;

TEST_CASE("AUC special cases") {
  CHECK(auc_roc(std::vector<int>{0, 0, 1, 1}, std::vector<double>{0.1, 0.2, 0.8, 0.9}) == 1.0);
  CHECK(auc_roc(std::vector<int>{0, 1, 0, 1}, std::vector<double>{3, 3, 3, 3}) == 0.5);
  CHECK(auc_roc(std::vector<int>{1, 0, 1, 0}, std::vector<double>{0.9, 0.8, 0.7, 0.1}) == 0.75);
  CHECK_THROWS_AS(auc_roc(std::vector<int>{0, 0}, std::vector<double>{1, 2}), UsageError);
  CHECK_THROWS_AS(auc_roc(std::vector<int>{1, 1}, std::vector<double>{1, 2}), UsageError);
}

TEST_CASE("AP special cases") {
  CHECK(average_precision(std::vector<int>{1, 1, 0}, std::vector<double>{0.9, 0.8, 0.1}) == 1.0);
  CHECK(average_precision(std::vector<int>{1, 0}, std::vector<double>{0.1, 0.9}) == 0.5);
  CHECK(average_precision(std::vector<int>{1, 0, 1}, std::vector<double>{0.9, 0.8, 0.7}) ==
        doctest::Approx((1.0 + 2.0 / 3.0) / 2));
  CHECK_THROWS_AS(average_precision(std::vector<int>{0}, std::vector<double>{1}), UsageError);
}

TEST_CASE("AP tie order is seeded and reproducible") {
  const std::vector<int> y{1, 0, 1, 0, 0, 1};
  const std::vector<double> s(6, 0.5);
  const double a = average_precision(y, s, 3);
  CHECK(a == average_precision(y, s, 3));
  double lo = 1, hi = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    lo = std::min(lo, average_precision(y, s, seed));
    hi = std::max(hi, average_precision(y, s, seed));
  }
  CHECK(lo < hi);
}

TEST_CASE("AUC and AP match brute force on random scored sets") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> size(2, 500);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = size(rng);
    std::vector<int> y(n);
    std::vector<double> s(n);
    const double rate = 0.05 + 0.9 * u(rng);
    for (int i = 0; i < n; ++i) y[i] = u(rng) < rate;
    y[0] = 0;
    y[1] = 1;
    // a third of the sets are coarsely quantised so ties are common
    const bool coarse = trial % 3 == 0;
    for (int i = 0; i < n; ++i) s[i] = coarse ? std::floor(u(rng) * 10) / 10 : u(rng) + 0.3 * y[i];
    CHECK(std::abs(auc_roc(y, s) - testing::brute_auc(y, s)) <= 1e-12);
    if (!coarse) CHECK(std::abs(average_precision(y, s) - testing::brute_ap(y, s)) <= 1e-12);
  }
}

TEST_CASE("metrics are invariant under increasing transforms") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<int> y(300);
  std::vector<double> s(300), t(300);
  for (int i = 0; i < 300; ++i) {
    y[i] = u(rng) < 0.3;
    s[i] = std::floor((u(rng) + 0.4 * y[i]) * 50) / 50;
    t[i] = std::exp(3 * s[i]) - 7;
  }
  CHECK(auc_roc(y, s) == auc_roc(y, t));
  CHECK(average_precision(y, s, 9) == average_precision(y, t, 9));
}

TEST_CASE("Wilcoxon special cases") {
  std::vector<std::string> warnings;
  set_log_sink([&](const std::string& m) { warnings.push_back(m); });
  const std::vector<double> a{1, 2, 3, 4, 5, 6};
  const auto same = wilcoxon_signed_rank(a, a);
  CHECK(same.p_value == 1.0);
  CHECK(warnings.size() == 1);
  set_log_sink(nullptr);

  const std::vector<double> b{0.5, 1.5, 2.4, 3.3, 4.2, 5.1};
  const auto r = wilcoxon_signed_rank(a, b);
  CHECK(r.exact);
  CHECK(r.n == 6);
  CHECK(r.p_value == doctest::Approx(0.03125).epsilon(1e-12));

  CHECK_THROWS_AS(wilcoxon_signed_rank(std::vector<double>{1, 2}, std::vector<double>{1}), UsageError);
  CHECK_THROWS_AS(wilcoxon_signed_rank(std::vector<double>{1, 2, 3}, std::vector<double>{0, 0, 0}),
                  UsageError);
}

TEST_CASE("Wilcoxon exact path equals full enumeration") {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> g(0.2, 1.0);
  for (int n = 5; n <= 12; ++n) {
    for (int trial = 0; trial < 15; ++trial) {
      std::vector<double> a(n), b(n), d(n);
      for (int i = 0; i < n; ++i) {
        a[i] = g(rng);
        // every fourth trial rounds so |d| ties occur
        b[i] = trial % 4 == 0 ? a[i] - std::round(g(rng) * 2) / 2 - 0.5 : g(rng);
        if (a[i] == b[i]) b[i] -= 1;
        d[i] = a[i] - b[i];
      }
      const auto r = wilcoxon_signed_rank(a, b);
      CHECK(r.exact);
      CHECK(r.p_value == doctest::Approx(testing::enumerate_wilcoxon(d)).epsilon(1e-12));
    }
  }
}

TEST_CASE("Wilcoxon approximation agrees with the exact path at n = 12") {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> a(13), b(13);
    for (int i = 0; i < 13; ++i) {
      a[i] = g(rng) + 0.4;
      b[i] = g(rng);
    }
    // Exact on the first 12 pairs vs approximation on the same 12 pairs via
    // a 13th identical pair, which is dropped as a zero difference.
    std::vector<double> a12(a.begin(), a.begin() + 12), b12(b.begin(), b.begin() + 12);
    const auto exact = wilcoxon_signed_rank(a12, b12);
    const std::vector<double> d = [&] {
      std::vector<double> v;
      for (int i = 0; i < 12; ++i) v.push_back(a12[i] - b12[i]);
      return v;
    }();
    // normal approximation evaluated directly
    const double n = 12, mean = n * (n + 1) / 4, var = n * (n + 1) * (2 * n + 1) / 24;
    const double z = std::max(0.0, std::abs(exact.w_plus - mean) - 0.5) / std::sqrt(var);
    const double approx = std::erfc(z / std::sqrt(2.0));
    CHECK(std::abs(exact.p_value - std::min(1.0, approx)) < 0.02);
    (void)d;
  }
  std::vector<double> a(20), b(20);
  for (int i = 0; i < 20; ++i) {
    a[i] = g(rng) + 1;
    b[i] = g(rng);
  }
  const auto big = wilcoxon_signed_rank(a, b);
  CHECK_FALSE(big.exact);
  CHECK(big.p_value > 0);
  CHECK(big.p_value < 0.05);
}

TEST_CASE("summary statistics") {
  const auto [m, s] = mean_std(std::vector<double>{1, 2, 3, 4});
  CHECK(m == 2.5);
  CHECK(s == doctest::Approx(std::sqrt(5.0 / 3.0)));
  CHECK(mean_std(std::vector<double>{7}).second == 0.0);

  const std::vector<int> y{0, 1, 0, 1};
  const std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  const auto summary =
      evaluate_method("fixed", [](std::uint64_t) { return std::vector<double>{0.1, 0.9, 0.3, 0.2}; },
                      y, seeds);
  CHECK(summary.auc.size() == 5);
  CHECK(summary.auc_std == 0.0);
  CHECK(summary.ap_std == 0.0);
  CHECK(summary.auc_mean == 0.75);
  const std::vector<std::uint64_t> dup{1, 1};
  CHECK_THROWS_AS(evaluate_method("x", [](std::uint64_t) { return std::vector<double>{}; }, y, dup),
                  ConfigError);
}

TEST_CASE("metric records round-trip through JSON") {
  const MetricRecord r{"r2ad2", "blobs", "known", 3, 0.9712345678901234, 0.5, "fp", "fam", "al"};
  const std::string line = to_json_line(r);
  CHECK(line.find('\n') == std::string::npos);
  CHECK(line.rfind("{\"method\":\"r2ad2\"", 0) == 0);
  CHECK(parse_json_line(line) == r);
}
