#include <cmath>
#include <random>

#include "r2ad2/data/dataset.hpp"
#include "r2ad2/error.hpp"
#include "r2ad2/hash.hpp"

namespace r2ad2::data {

namespace {

double clip01(double v) { return std::clamp(v, 0.0, 1.0); }

LabeledSample anomaly(std::vector<double> x, const std::string& cls) {
  return {std::move(x), 1, cls, cls};
}

struct Blobs {
  std::vector<std::vector<double>> centres;
  double sd;
  double inner, outer;

  Blobs(int dim, double blob_std, double shell_inner, double shell_outer, std::mt19937_64& rng)
      : sd(blob_std), inner(shell_inner), outer(shell_outer) {
    std::uniform_real_distribution<double> c(0.25, 0.75);
    centres.assign(2, std::vector<double>(static_cast<std::size_t>(dim)));
    for (auto& centre : centres)
      for (auto& v : centre) v = c(rng);
  }

  std::vector<double> normal(std::mt19937_64& rng) const {
    std::normal_distribution<double> noise(0.0, sd);
    const auto& c = centres[std::bernoulli_distribution(0.5)(rng) ? 1 : 0];
    std::vector<double> x(c.size());
    for (std::size_t j = 0; j < c.size(); ++j) x[j] = clip01(c[j] + noise(rng));
    return x;
  }

  // Uniform direction, radius uniform in [inner, outer] blob_std around a
  // randomly chosen centre, clipped to the unit cube.
  std::vector<double> shell(std::mt19937_64& rng) const {
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> u(inner, outer);
    const auto& c = centres[std::bernoulli_distribution(0.5)(rng) ? 1 : 0];
    std::vector<double> dir(c.size());
    double norm = 0.0;
    do {
      norm = 0.0;
      for (auto& v : dir) norm += (v = g(rng)) * v;
    } while (norm == 0.0);
    const double r = u(rng) * sd / std::sqrt(norm);
    std::vector<double> x(c.size());
    for (std::size_t j = 0; j < c.size(); ++j) x[j] = clip01(c[j] + r * dir[j]);
    return x;
  }

  // A normal sample with three features pushed across the cube centre.
  std::vector<double> corrupted(std::mt19937_64& rng) const {
    std::vector<double> x = normal(rng);
    std::uniform_int_distribution<std::size_t> pick(0, x.size() - 1);
    std::vector<bool> done(x.size(), false);
    for (int k = 0; k < 3;) {
      const std::size_t j = pick(rng);
      if (done[j]) continue;
      done[j] = true;
      x[j] = clip01(x[j] < 0.5 ? x[j] + 0.35 : x[j] - 0.35);
      ++k;
    }
    return x;
  }
};

Dataset make_blobs(const SyntheticSpec& spec, bool two_class) {
  std::mt19937_64 rng(derive_seed(spec.seed, "blobs"));
  if (!(spec.blob_std > 0)) throw ConfigError("blob_std must be positive");
  if (!(spec.shell_inner >= 0 && spec.shell_outer >= spec.shell_inner))
    throw ConfigError("shell radii must satisfy 0 <= inner <= outer");
  const Blobs blobs(spec.dim, spec.blob_std, spec.shell_inner, spec.shell_outer, rng);
  Dataset d;
  for (int i = 0; i < spec.n_normals; ++i) d.push_back({blobs.normal(rng), 0, "", ""});
  for (int i = 0; i < spec.n_anomalies; ++i) {
    if (two_class && i % 2 == 1) d.push_back(anomaly(blobs.corrupted(rng), "B"));
    else d.push_back(anomaly(blobs.shell(rng), two_class ? "A" : "shell"));
  }
  return d;
}

Dataset make_rings(const SyntheticSpec& spec) {
  if (spec.dim < 2) throw ConfigError("rings needs at least two dimensions");
  std::mt19937_64 rng(derive_seed(spec.seed, "rings"));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> noise(0.5, 0.05);
  auto point = [&](double r_lo, double r_hi) {
    // uniform in the annulus r_lo <= r <= r_hi
    const double r = std::sqrt(r_lo * r_lo + u(rng) * (r_hi * r_hi - r_lo * r_lo));
    const double a = 2.0 * M_PI * u(rng);
    std::vector<double> x(static_cast<std::size_t>(spec.dim));
    x[0] = 0.5 + r * std::cos(a);
    x[1] = 0.5 + r * std::sin(a);
    for (std::size_t j = 2; j < x.size(); ++j) x[j] = clip01(noise(rng));
    return x;
  };
  Dataset d;
  for (int i = 0; i < spec.n_normals; ++i) d.push_back({point(0.0, 0.2), 0, "", ""});
  for (int i = 0; i < spec.n_anomalies; ++i) d.push_back(anomaly(point(0.3, 0.45), "annulus"));
  return d;
}

}  // namespace

std::vector<std::string> synthetic_names() { return {"blobs", "blobs-2class", "rings"}; }

Dataset make_synthetic(const SyntheticSpec& spec) {
  if (spec.n_normals < 0 || spec.n_anomalies < 0 || spec.dim < 1)
    throw ConfigError("synthetic dataset sizes must be positive");
  if (spec.name == "blobs") return make_blobs(spec, false);
  if (spec.name == "blobs-2class") return make_blobs(spec, true);
  if (spec.name == "rings") return make_rings(spec);
  throw ConfigError("unknown synthetic dataset '" + spec.name + "'");
}

}  // namespace r2ad2::data
