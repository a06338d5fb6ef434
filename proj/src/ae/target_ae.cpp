#include "r2ad2/ae/target_ae.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "json.hpp"
#include "r2ad2/error.hpp"
#include "r2ad2/hash.hpp"
#include "r2ad2/nn/checkpoint.hpp"
#include "r2ad2/nn/loss.hpp"
#include "r2ad2/nn/optim.hpp"

namespace r2ad2::ae {

using nlohmann::json;

void AEArchitecture::validate() const {
  if (input_dim <= 0) throw ConfigError("autoencoder input_dim must be positive");
  if (encoder_dims.empty()) throw ConfigError("autoencoder needs at least one encoder layer");
  for (int d : encoder_dims)
    if (d <= 0) throw ConfigError("autoencoder layer widths must be positive");
}

std::vector<nn::LayerSpec> AEArchitecture::layers() const {
  validate();
  std::vector<int> widths{input_dim};
  widths.insert(widths.end(), encoder_dims.begin(), encoder_dims.end());
  for (auto it = encoder_dims.rbegin() + 1; it != encoder_dims.rend(); ++it) widths.push_back(*it);
  widths.push_back(input_dim);
  std::vector<nn::LayerSpec> out;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    const bool last = i + 2 == widths.size();
    out.push_back(nn::LayerSpec::dense(widths[i], widths[i + 1],
                                       last ? nn::Activation::Sigmoid : nn::Activation::Relu));
  }
  return out;
}

void Schedule::validate() const {
  if (n_snapshots < 1) throw ConfigError("a snapshot family needs at least one snapshot");
  if (t0 < 1) throw ConfigError("t0 must be at least one epoch");
  if (n_snapshots > 1 && t < 1) throw ConfigError("t must be at least one epoch");
}

std::vector<int> Schedule::epochs() const {
  std::vector<int> e;
  for (int j = 0; j < n_snapshots; ++j) e.push_back(epoch_of(j));
  return e;
}

SnapshotFamily::SnapshotFamily(AEArchitecture arch, Schedule schedule, TrainOptions options,
                               std::uint64_t seed, std::vector<nn::Network> snapshots)
    : arch_(std::move(arch)),
      schedule_(schedule),
      options_(options),
      seed_(seed),
      snapshots_(std::move(snapshots)) {
  if (snapshots_.size() != static_cast<std::size_t>(schedule_.n_snapshots))
    throw ConfigError("snapshot count does not match the schedule");
  const auto layers = arch_.layers();
  for (const auto& s : snapshots_)
    if (s.layers() != layers) throw ConfigError("snapshot architecture mismatch");
}

std::size_t SnapshotFamily::param_count() const {
  return snapshots_.empty() ? 0 : snapshots_.front().param_count();
}

const nn::Network& SnapshotFamily::snapshot(int j) const {
  if (j < 0 || j >= size())
    throw UsageError("snapshot index " + std::to_string(j) + " out of range (family has " +
                     std::to_string(size()) + ")");
  return snapshots_[static_cast<std::size_t>(j)];
}

std::string SnapshotFamily::manifest_text() const {
  json m;
  m["format"] = "r2ad2-family";
  m["version"] = 1;
  m["input_dim"] = arch_.input_dim;
  m["encoder_dims"] = arch_.encoder_dims;
  m["t0"] = schedule_.t0;
  m["t"] = schedule_.t;
  m["n_snapshots"] = schedule_.n_snapshots;
  m["epochs"] = schedule_.epochs();
  m["batch_size"] = options_.batch_size;
  m["lr"] = options_.lr;
  m["seed"] = seed_;
  m["dataset_fingerprint"] = dataset_fingerprint_;
  json snaps = json::array();
  for (int j = 0; j < size(); ++j) {
    snaps.push_back({{"file", "snapshot_" + std::to_string(j) + ".ckpt"},
                     {"epoch", schedule_.epoch_of(j)},
                     {"param_hash", to_hex(snapshots_[j].params().hash())}});
  }
  m["snapshots"] = snaps;
  return m.dump(2);
}

std::uint64_t SnapshotFamily::manifest_hash() const {
  const std::string text = manifest_text();
  return Hasher{}.bytes(text.data(), text.size()).digest();
}

namespace {
void check_unit_interval(const nn::Matrix& x) {
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double v = x.data()[i];
    if (!(v >= 0.0 && v <= 1.0))
      throw UsageError("autoencoder training data must lie in [0,1]; found " + std::to_string(v));
  }
}
}  // namespace

SnapshotFamily train_target_family(const AEArchitecture& arch, const nn::Matrix& normals,
                                   const Schedule& schedule, std::uint64_t seed,
                                   const TrainOptions& options) {
  schedule.validate();
  if (normals.rows() == 0) throw UsageError("cannot train the target autoencoder on no samples");
  if (normals.cols() != arch.input_dim)
    throw ConfigError("training data has " + std::to_string(normals.cols()) +
                      " features, autoencoder expects " + std::to_string(arch.input_dim));
  if (options.batch_size < 1) throw ConfigError("batch size must be positive");
  check_unit_interval(normals);

  nn::Network net(arch.layers());
  net.initialize(derive_seed(seed, "ae-init"));
  nn::AdamState adam(net.param_count(), options.lr);

  const Eigen::Index n = normals.rows();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::vector<nn::Network> snapshots;
  std::vector<double> losses;
  int next_snapshot = 0;

  for (int epoch = 1; epoch <= schedule.total_epochs(); ++epoch) {
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::mt19937_64 rng(derive_seed(seed, "ae-epoch", static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0.0;
    for (Eigen::Index start = 0; start < n; start += options.batch_size) {
      const Eigen::Index b = std::min<Eigen::Index>(options.batch_size, n - start);
      nn::Matrix batch(b, normals.cols());
      for (Eigen::Index r = 0; r < b; ++r) batch.row(r) = normals.row(order[start + r]);
      nn::ForwardCache cache;
      const nn::Matrix recon = net.forward(batch, 1, nn::Mode::Train, &cache);
      loss_sum += nn::loss_mse(recon, batch) * static_cast<double>(b);
      const nn::Gradients g = net.backward(cache, nn::loss_mse_grad(recon, batch));
      nn::adam_step(net.mutable_params().values, g.params, adam);
    }
    losses.push_back(loss_sum / static_cast<double>(n));

    if (next_snapshot < schedule.n_snapshots && epoch == schedule.epoch_of(next_snapshot)) {
      snapshots.push_back(net);
      ++next_snapshot;
    }
  }

  SnapshotFamily family(arch, schedule, options, seed, std::move(snapshots));
  family.epochs_run_ = schedule.total_epochs();
  family.epoch_losses_ = std::move(losses);
  return family;
}

nn::Matrix reconstruct(const SnapshotFamily& family, int snapshot_idx, const nn::Matrix& x) {
  return family.snapshot(snapshot_idx).predict(x);
}

std::vector<double> reconstruction_scores(const SnapshotFamily& family, const nn::Matrix& x) {
  const nn::Matrix recon = family.last().predict(x);
  std::vector<double> out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    out[i] = (recon.row(i) - x.row(i)).squaredNorm() / static_cast<double>(x.cols());
  return out;
}

double reconstruction_score(const SnapshotFamily& family, std::span<const double> x) {
  nn::Matrix row = nn::ConstMatrixMap(x.data(), 1, static_cast<Eigen::Index>(x.size()));
  return reconstruction_scores(family, row).front();
}

void save_family(const SnapshotFamily& family, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (int j = 0; j < family.size(); ++j)
    nn::save_checkpoint(family.snapshot(j), dir / ("snapshot_" + std::to_string(j) + ".ckpt"));
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) throw IoError("cannot write " + (dir / "manifest.json").string());
  out << family.manifest_text() << '\n';
}

SnapshotFamily load_family(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw IoError("no manifest.json in " + dir.string());
  json m;
  try {
    m = json::parse(in);
  } catch (const json::exception& e) {
    throw IoError("malformed family manifest: " + std::string(e.what()));
  }
  if (m.value("format", "") != "r2ad2-family") throw IoError("not a family manifest");

  AEArchitecture arch{m.at("input_dim").get<int>(), m.at("encoder_dims").get<std::vector<int>>()};
  Schedule schedule{m.at("t0").get<int>(), m.at("t").get<int>(), m.at("n_snapshots").get<int>()};
  TrainOptions options{m.at("batch_size").get<int>(), m.at("lr").get<double>()};
  std::vector<nn::Network> snaps;
  for (const auto& s : m.at("snapshots")) {
    nn::Network net = nn::load_checkpoint(dir / s.at("file").get<std::string>());
    if (to_hex(net.params().hash()) != s.at("param_hash").get<std::string>())
      throw IoError("snapshot " + s.at("file").get<std::string>() +
                    " does not match its manifest hash");
    snaps.push_back(std::move(net));
  }
  SnapshotFamily family(arch, schedule, options, m.at("seed").get<std::uint64_t>(),
                        std::move(snaps));
  family.set_dataset_fingerprint(m.value("dataset_fingerprint", ""));
  return family;
}

}  // namespace r2ad2::ae
