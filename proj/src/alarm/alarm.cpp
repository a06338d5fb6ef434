#include "r2ad2/alarm/alarm.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "json.hpp"
#include "r2ad2/error.hpp"
#include "r2ad2/hash.hpp"
#include "r2ad2/log.hpp"
#include "r2ad2/nn/checkpoint.hpp"
#include "r2ad2/nn/loss.hpp"
#include "r2ad2/nn/optim.hpp"

namespace r2ad2::alarm {

namespace {
// Every synthetic sample is a counterexample.
constexpr double kSyntheticLabel = 1.0;

std::string family_key(const ae::SnapshotFamily& family) {
  return to_hex(family.manifest_hash());
}
}  // namespace

void AlarmArchitecture::validate(int n_snapshots) const {
  if (input_dim <= 0) throw ConfigError("alarm input_dim must be positive");
  if (n_snapshots < 1) throw ConfigError("alarm needs at least one snapshot");
  if (layer_dims.empty()) throw ConfigError("alarm needs at least one hidden layer");
  for (int d : layer_dims)
    if (d <= 0) throw ConfigError("alarm layer widths must be positive");
  if (n_recurrent < 0 || n_recurrent > static_cast<int>(layer_dims.size()))
    throw ConfigError("alarm n_recurrent out of range");
  if (n_snapshots > 1 && n_recurrent < 1)
    throw ConfigError("a multi-snapshot alarm needs at least one recurrent layer");
}

std::vector<nn::LayerSpec> AlarmArchitecture::layers(int n_snapshots) const {
  validate(n_snapshots);
  std::vector<nn::LayerSpec> out{nn::LayerSpec::batchnorm(input_dim)};
  int width = input_dim;
  for (std::size_t i = 0; i < layer_dims.size(); ++i) {
    const int d = layer_dims[i];
    if (static_cast<int>(i) < n_recurrent && n_snapshots > 1)
      out.push_back(nn::LayerSpec::lstm(width, d));
    else
      out.push_back(nn::LayerSpec::dense(width, d, nn::Activation::Relu));
    width = d;
  }
  out.push_back(nn::LayerSpec::dense(width, 1, nn::Activation::Linear));
  return out;
}

SyntheticAnomalySampler::SyntheticAnomalySampler(int dim, std::uint64_t seed, double mean,
                                                 double stddev)
    : dim_(dim), rng_(seed), dist_(mean, stddev) {
  if (dim <= 0) throw ConfigError("sampler dimension must be positive");
}

nn::Matrix SyntheticAnomalySampler::sample(int batch_size) {
  if (batch_size < 1) throw UsageError("synthetic batch size must be at least 1");
  nn::Matrix x(batch_size, dim_);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = dist_(rng_);
  return x;
}

std::uint64_t AlarmModel::hash() const { return nn::checkpoint_hash(net); }

AlarmModel untrained_alarm(const AlarmArchitecture& arch, const ae::SnapshotFamily& family,
                           std::uint64_t seed) {
  AlarmModel m{arch, family.size(), nn::Network(arch.layers(family.size())), family_key(family), {}};
  m.net.initialize(seed);
  auto& p = m.net.mutable_params();
  const int last = static_cast<int>(m.net.layers().size()) - 1;
  for (std::size_t b = p.first_block_of(last); b < p.layout.size(); ++b)
    std::ranges::fill(p.block(b), 0.0);
  return m;
}

namespace {

void check_train_set(const TrainSet& set, const ae::SnapshotFamily& family) {
  if (static_cast<std::size_t>(set.features.rows()) != set.labels.size())
    throw ConfigError("train set has " + std::to_string(set.features.rows()) + " rows but " +
                      std::to_string(set.labels.size()) + " labels");
  if (set.features.cols() != family.architecture().input_dim)
    throw ConfigError("train set features do not match the autoencoder input dimension");
  for (int y : set.labels)
    if (y != 0 && y != 1) throw ConfigError("labels must be 0 or 1");
  if (std::ranges::count(set.labels, 0) == 0)
    throw UsageError("alarm training needs at least one normal sample");
}

// dL/dz of the mean BXE for logits z against `targets`, plus the loss.
double bxe_head(const nn::Matrix& logits, std::span<const double> targets, nn::Matrix& grad) {
  const Eigen::Index b = logits.rows();
  grad.resize(b, 1);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < b; ++i) {
    const double p = nn::sigmoid(logits(i, 0));
    loss += nn::loss_bxe(targets[i], p);
    grad(i, 0) = (p - targets[i]) / static_cast<double>(b);
  }
  return loss / static_cast<double>(b);
}

}  // namespace

AlarmModel train_alarm(const AlarmArchitecture& arch, const ae::SnapshotFamily& family,
                       const TrainSet& train_set, std::uint64_t seed,
                       const AlarmTrainOptions& options, const BatchObserver& observer) {
  check_train_set(train_set, family);
  if (options.epochs < 0) throw ConfigError("alarm epochs must be non-negative");
  if (options.batch_size < 1) throw ConfigError("alarm batch size must be positive");
  if (arch.input_dim != static_cast<int>(family.param_count()))
    throw ConfigError("alarm input_dim " + std::to_string(arch.input_dim) +
                      " does not match the family's parameter count " +
                      std::to_string(family.param_count()));

  const int S = family.size();
  AlarmModel model{arch, S, nn::Network(arch.layers(S), options.bn), family_key(family), {}};
  nn::Network& net = model.net;
  net.initialize(derive_seed(seed, "alarm-init"));
  nn::AdamState adam(net.param_count(), options.lr);

  const gradseq::SequenceCache real(family, train_set.features, options.cache_policy,
                                    options.cache_capacity);
  SyntheticAnomalySampler sampler(family.architecture().input_dim,
                                  derive_seed(seed, "alarm-synthetic"));

  const std::size_t n = train_set.labels.size();
  std::vector<std::size_t> anomalies;
  for (std::size_t i = 0; i < n; ++i)
    if (train_set.labels[i] == 1) anomalies.push_back(i);
  const std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(options.batch_size), n);
  const std::size_t steps_per_epoch = n / batch;
  const bool oversample = options.oversample_anomalies && !anomalies.empty();

  std::vector<std::size_t> order(n);
  std::vector<double> targets(batch);
  const std::vector<double> synthetic_targets(batch, kSyntheticLabel);
  nn::Matrix grad_out;

  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    std::mt19937_64 rng(derive_seed(seed, "alarm-epoch", static_cast<std::uint64_t>(epoch)));
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    double real_sum = 0.0, synth_sum = 0.0;

    for (std::size_t step = 0; step < steps_per_epoch; ++step) {
      std::span<std::size_t> rows(order.data() + step * batch, batch);
      if (oversample && std::none_of(rows.begin(), rows.end(),
                                     [&](std::size_t r) { return train_set.labels[r] == 1; })) {
        std::uniform_int_distribution<std::size_t> pick(0, anomalies.size() - 1);
        rows.back() = anomalies[pick(rng)];
      }
      if (observer) observer(model.history.steps, rows);
      for (std::size_t b = 0; b < batch; ++b) targets[b] = train_set.labels[rows[b]];

      // Real samples: the only pass allowed to move batch-norm state.
      nn::ForwardCache real_cache;
      const nn::Matrix real_logits =
          net.forward(real.gather(rows), S, nn::ForwardOptions{nn::Mode::Train, true}, &real_cache);
      real_sum += bxe_head(real_logits, targets, grad_out);
      nn::Gradients g = net.backward(real_cache, grad_out);

      // Synthetic counterexamples, one per real sample, always labelled 1.
      const nn::Matrix synth_input = gradseq::alarm_input(family, sampler.sample(int(batch)));
      nn::ForwardCache synth_cache;
      nn::Matrix synth_logits;
      if (options.synthetic_updates_bn_stats)
        synth_logits =
            net.forward(synth_input, S, nn::ForwardOptions{nn::Mode::Train, true}, &synth_cache);
      else
        synth_logits = net.forward(synth_input, S,
                                   options.synthetic_norm == SyntheticNorm::BatchStatistics
                                       ? nn::Mode::Train
                                       : nn::Mode::Infer,
                                   &synth_cache);
      synth_sum += bxe_head(synth_logits, synthetic_targets, grad_out);
      nn::Gradients gs = net.backward(synth_cache, grad_out);
      net.mask_batchnorm_params(gs.params);

      for (std::size_t k = 0; k < g.params.size(); ++k) g.params[k] += gs.params[k];
      nn::adam_step(net.mutable_params().values, g.params, adam);
      ++model.history.steps;
    }
    const double denom = static_cast<double>(std::max<std::size_t>(steps_per_epoch, 1));
    model.history.real_loss.push_back(real_sum / denom);
    model.history.synthetic_loss.push_back(synth_sum / denom);
  }
  if (!model.history.real_loss.empty())
    log_info("alarm trained: " + std::to_string(model.history.steps) + " steps, final real BXE " +
             std::to_string(model.history.real_loss.back()) + ", synthetic BXE " +
             std::to_string(model.history.synthetic_loss.back()));
  return model;
}

std::vector<double> score_batch(const AlarmModel& alarm, const nn::Matrix& step_major) {
  if (step_major.cols() != alarm.arch.input_dim)
    throw ConfigError("gradient width " + std::to_string(step_major.cols()) +
                      " does not match alarm input_dim " + std::to_string(alarm.arch.input_dim));
  if (step_major.rows() % alarm.n_snapshots != 0)
    throw ConfigError("step-major batch rows are not a multiple of the snapshot count");
  const nn::Matrix z = alarm.net.predict(step_major, alarm.n_snapshots);
  std::vector<double> out(static_cast<std::size_t>(z.rows()));
  for (Eigen::Index i = 0; i < z.rows(); ++i) out[i] = nn::sigmoid(z(i, 0));
  return out;
}

double score(const AlarmModel& alarm, const gradseq::GradientSequence& seq) {
  if (seq.n_snapshots() != alarm.n_snapshots)
    throw ConfigError("sequence has " + std::to_string(seq.n_snapshots()) +
                      " steps, alarm expects " + std::to_string(alarm.n_snapshots));
  return score_batch(alarm, seq.grads).front();
}

namespace {
void check_family(const AlarmModel& alarm, const ae::SnapshotFamily& family) {
  if (family_key(family) != alarm.family_hash)
    throw ConfigError("alarm was trained on family " + alarm.family_hash + ", not " +
                      family_key(family));
}
}  // namespace

double score_input(const AlarmModel& alarm, const ae::SnapshotFamily& family,
                   std::span<const double> x) {
  check_family(alarm, family);
  return score(alarm, gradseq::extract_sequence(family, x));
}

std::vector<double> score_inputs(const AlarmModel& alarm, const ae::SnapshotFamily& family,
                                 const nn::Matrix& x) {
  check_family(alarm, family);
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(x.rows()));
  // Chunked so large test sets never materialise every gradient at once.
  constexpr Eigen::Index kChunk = 256;
  for (Eigen::Index start = 0; start < x.rows(); start += kChunk) {
    const Eigen::Index len = std::min(kChunk, x.rows() - start);
    const auto s = score_batch(alarm, gradseq::alarm_input(family, x.middleRows(start, len)));
    out.insert(out.end(), s.begin(), s.end());
  }
  return out;
}

void save_alarm(const AlarmModel& alarm, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nn::save_checkpoint(alarm.net, dir / "alarm.ckpt");
  nlohmann::json m = {{"format", "r2ad2-alarm"},
                      {"version", 1},
                      {"family_hash", alarm.family_hash},
                      {"input_dim", alarm.arch.input_dim},
                      {"layer_dims", alarm.arch.layer_dims},
                      {"n_recurrent", alarm.arch.n_recurrent},
                      {"n_snapshots", alarm.n_snapshots},
                      {"checkpoint_hash", to_hex(alarm.hash())}};
  std::ofstream out(dir / "alarm.json", std::ios::trunc);
  if (!out) throw IoError("cannot write " + (dir / "alarm.json").string());
  out << m.dump(2) << '\n';
}

AlarmModel load_alarm(const std::filesystem::path& dir, const ae::SnapshotFamily& family) {
  std::ifstream in(dir / "alarm.json");
  if (!in) throw IoError("no alarm.json in " + dir.string());
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed alarm manifest: " + std::string(e.what()));
  }
  AlarmModel alarm;
  alarm.arch = {m.at("input_dim").get<int>(), m.at("layer_dims").get<std::vector<int>>(),
                m.at("n_recurrent").get<int>()};
  alarm.n_snapshots = m.at("n_snapshots").get<int>();
  alarm.family_hash = m.at("family_hash").get<std::string>();
  check_family(alarm, family);
  alarm.net = nn::load_checkpoint(dir / "alarm.ckpt");
  if (to_hex(alarm.hash()) != m.at("checkpoint_hash").get<std::string>())
    throw IoError("alarm checkpoint does not match its manifest");
  if (alarm.net.layers() != alarm.arch.layers(alarm.n_snapshots))
    throw IoError("alarm checkpoint architecture does not match its manifest");
  return alarm;
}

}  // namespace r2ad2::alarm
