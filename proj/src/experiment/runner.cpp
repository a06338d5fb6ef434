#include "r2ad2/experiment/runner.hpp"

#include <fcntl.h>
#include <malloc.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "r2ad2/error.hpp"
#include "r2ad2/hash.hpp"
#include "r2ad2/log.hpp"

namespace r2ad2::experiment {

namespace fs = std::filesystem;

// ------------------------------------------------------------------ data

PreparedData prepare_data(const ExperimentConfig& config, std::uint64_t run_seed) {
  data::SplitSpec split = config.split;
  if (config.resplit_per_run) split.seed = derive_seed(config.split.seed, "run-split", run_seed);

  PreparedData out;
  out.dataset_name = config.data.display_name();
  if (!config.data.synthetic.empty()) {
    data::SyntheticSpec spec = config.data.generator;
    spec.name = config.data.synthetic;
    const data::Dataset d = data::make_synthetic(spec);
    out.fingerprint = data::dataset_fingerprint(d);
    out.feature_dim = spec.dim;
    out.splits = data::make_splits(d, split);
  } else {
    const data::Schema schema = data::load_schema(config.data.schema);
    data::LoadedCsv loaded = data::load_csv(config.data.csv, schema, split);
    out.feature_dim = loaded.feature_dim;
    out.splits = std::move(loaded.splits);
    // Row-order independent, so every run seed reports the same source.
    data::Dataset all;
    for (const auto* part : {&out.splits.ae_train_normals, &out.splits.heldback_normals,
                             &out.splits.train_anomalies, &out.splits.val, &out.splits.test})
      all.insert(all.end(), part->begin(), part->end());
    out.fingerprint = data::dataset_fingerprint(all);
  }
  return out;
}

// ------------------------------------------------------------------ cells

namespace {

ae::Schedule schedule_for(const ExperimentConfig& c, int n_snapshots) {
  return {c.schedule.t0, c.schedule.t, n_snapshots};
}

alarm::AlarmArchitecture alarm_arch_for(const ExperimentConfig& c, std::size_t n_params) {
  return {static_cast<int>(n_params), c.alarm_dims, c.alarm_recurrent};
}

eval::MetricRecord make_record(const std::string& method, const PreparedData& prepared,
                               const std::string& scenario, std::uint64_t seed,
                               std::span<const int> labels, std::span<const double> scores,
                               const std::string& family_hash, const std::string& alarm_hash) {
  eval::MetricRecord r;
  r.method = method;
  r.dataset = prepared.dataset_name;
  r.scenario = scenario;
  r.seed = seed;
  r.auc = eval::auc_roc(labels, scores);
  r.ap = eval::average_precision(labels, scores, seed);
  r.dataset_fingerprint = prepared.fingerprint;
  r.family_hash = family_hash;
  r.alarm_hash = alarm_hash;
  return r;
}

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

}  // namespace

TrainedModels train_models(const ExperimentConfig& config, const PreparedData& prepared,
                           const data::ScenarioSpec& scenario, int n_snapshots,
                           std::uint64_t seed) {
  data::ScenarioData sd = data::apply_scenario(prepared.splits, scenario, seed);
  const ae::AEArchitecture arch{prepared.feature_dim, config.encoder_dims};
  ae::SnapshotFamily family = ae::train_target_family(
      arch, data::features(sd.ae_train), schedule_for(config, n_snapshots), seed, config.ae_train);
  family.set_dataset_fingerprint(data::dataset_fingerprint(sd.ae_train));

  const data::Dataset train = sd.alarm_train(config.include_ae_normals);
  const alarm::TrainSet set{data::features(train), data::labels(train)};
  alarm::AlarmModel model = alarm::train_alarm(alarm_arch_for(config, family.param_count()),
                                               family, set, seed, config.alarm_train);
  return {std::move(family), std::move(model), std::move(sd)};
}

CellResult run_cell(const ExperimentConfig& config, const PreparedData& prepared,
                    const CellSpec& cell, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  const TrainedModels m = train_models(config, prepared, cell.scenario, cell.n_snapshots, seed);
  const data::Dataset& test = m.scenario.test;
  const nn::Matrix x = data::features(test);
  const std::vector<int> y = data::labels(test);
  const std::string family_hash = to_hex(m.family.manifest_hash());
  const std::string alarm_hash = to_hex(m.alarm.hash());

  std::vector<std::pair<std::string, std::vector<double>>> methods;
  methods.emplace_back(kMethodR2AD2, alarm::score_inputs(m.alarm, m.family, x));
  if (config.baselines) {
    methods.emplace_back(kMethodAE, ae::reconstruction_scores(m.family, x));
    const auto gradcon = eval::GradConScorer::fit(m.family, data::features(m.scenario.ae_train));
    methods.emplace_back(kMethodGradCon, gradcon.scores(x));
  }

  CellResult out;
  for (const auto& [method, scores] : methods)
    out.records.push_back(make_record(method, prepared, cell.label, seed, y, scores, family_hash,
                                      method == kMethodR2AD2 ? alarm_hash : ""));

  if (cell.per_class) {
    std::set<std::string> classes;
    for (const auto& s : test)
      if (s.label == 1) classes.insert(s.anomaly_class);
    for (const auto& c : classes) {
      std::vector<std::size_t> rows;
      for (std::size_t i = 0; i < test.size(); ++i)
        if (test[i].label == 0 || test[i].anomaly_class == c) rows.push_back(i);
      std::vector<int> yc;
      for (std::size_t i : rows) yc.push_back(y[i]);
      for (const auto& [method, scores] : methods) {
        std::vector<double> sc;
        for (std::size_t i : rows) sc.push_back(scores[i]);
        out.records.push_back(make_record(method, prepared, cell.label + kPerClassTag + c, seed, yc,
                                          sc, family_hash,
                                          method == kMethodR2AD2 ? alarm_hash : ""));
      }
    }
  }
  out.ae_params = m.family.param_count();
  out.alarm_params = m.alarm.net.param_count();
  out.seconds = seconds_since(start);
  return out;
}

// --------------------------------------------------------------- summary

std::vector<eval::MethodSummary> summarize(const std::vector<eval::MetricRecord>& records,
                                           std::vector<std::string>* scenarios) {
  std::vector<eval::MethodSummary> out;
  std::vector<std::string> keys;
  for (const auto& r : records) {
    const std::string key = r.scenario + '\x1f' + r.method;
    auto it = std::find(keys.begin(), keys.end(), key);
    if (it == keys.end()) {
      keys.push_back(key);
      out.push_back({r.method, {}, {}, {}});
      if (scenarios) scenarios->push_back(r.scenario);
      it = keys.end() - 1;
    }
    auto& s = out[static_cast<std::size_t>(it - keys.begin())];
    s.seeds.push_back(r.seed);
    s.auc.push_back(r.auc);
    s.ap.push_back(r.ap);
  }
  for (auto& s : out) {
    std::tie(s.auc_mean, s.auc_std) = eval::mean_std(s.auc);
    std::tie(s.ap_mean, s.ap_std) = eval::mean_std(s.ap);
  }
  return out;
}

namespace {
std::string fixed(double v, int digits = 4) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

double mean_auc(const std::vector<eval::MetricRecord>& records, const std::string& scenario,
                const std::string& method, std::size_t* count = nullptr) {
  std::vector<double> v;
  for (const auto& r : records)
    if (r.scenario == scenario && r.method == method) v.push_back(r.auc);
  if (count) *count = v.size();
  return v.empty() ? std::nan("") : eval::mean_std(v).first;
}
}  // namespace

std::string summary_csv(const std::vector<eval::MetricRecord>& records) {
  std::vector<std::string> scenarios;
  const auto sums = summarize(records, &scenarios);
  std::string out = "scenario,method,runs,auc_mean,auc_std,ap_mean,ap_std\n";
  for (std::size_t i = 0; i < sums.size(); ++i) {
    const auto& s = sums[i];
    out += scenarios[i] + "," + s.method + "," + std::to_string(s.auc.size()) + "," +
           fixed(s.auc_mean, 6) + "," + fixed(s.auc_std, 6) + "," + fixed(s.ap_mean, 6) + "," +
           fixed(s.ap_std, 6) + "\n";
  }
  return out;
}

std::string report(const std::vector<eval::MetricRecord>& records) {
  std::vector<std::string> scenarios;
  const auto sums = summarize(records, &scenarios);
  std::ostringstream out;
  std::string current;
  for (std::size_t i = 0; i < sums.size(); ++i) {
    if (scenarios[i] != current) {
      current = scenarios[i];
      out << "\n" << current << "\n";
      out << "  method      runs  AUC              AP\n";
    }
    const auto& s = sums[i];
    char line[160];
    std::snprintf(line, sizeof line, "  %-10s  %4zu  %.3f +- %.3f  %.3f +- %.3f\n",
                  s.method.c_str(), s.auc.size(), s.auc_mean, s.auc_std, s.ap_mean, s.ap_std);
    out << line;
  }

  // Paired tests: one pair per (dataset, scenario, seed) holding both methods.
  // Per-class rows reuse the same test normals and are left out.
  const auto per_class = [](const eval::MetricRecord& r) {
    return r.scenario.find(kPerClassTag) != std::string::npos;
  };
  std::map<std::string, double> ours;
  std::set<std::string> baselines;
  for (const auto& r : records) {
    if (per_class(r)) continue;
    const std::string key = r.dataset + '\x1f' + r.scenario + '\x1f' + std::to_string(r.seed);
    if (r.method == kMethodR2AD2)
      ours[key] = r.auc;
    else
      baselines.insert(r.method);
  }
  if (!ours.empty() && !baselines.empty()) out << "\nWilcoxon signed-rank, r2ad2 vs baseline (AUC)\n";
  for (const auto& b : baselines) {
    std::vector<double> a, c;
    for (const auto& r : records) {
      if (r.method != b || per_class(r)) continue;
      const std::string key = r.dataset + '\x1f' + r.scenario + '\x1f' + std::to_string(r.seed);
      if (auto it = ours.find(key); it != ours.end()) {
        a.push_back(it->second);
        c.push_back(r.auc);
      }
    }
    out << "  vs " << b << ": ";
    try {
      const auto w = eval::wilcoxon_signed_rank(a, c);
      out << "pairs " << a.size() << ", non-zero " << w.n << ", W+ " << w.w_plus << ", p "
          << fixed(w.p_value, 4) << (w.exact ? " (exact)" : " (normal approx.)") << "\n";
    } catch (const UsageError& e) {
      out << "not tested (" << e.what() << ")\n";
    }
  }
  return out.str();
}

std::vector<eval::MetricRecord> read_metrics(const fs::path& jsonl) {
  std::ifstream in(jsonl);
  if (!in) throw IoError("cannot read " + jsonl.string());
  std::vector<eval::MetricRecord> out;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(eval::parse_json_line(line));
  return out;
}

// ------------------------------------------------------------------ lock

DirectoryLock::DirectoryLock(const fs::path& dir) : path_(dir / ".lock") {
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0)
    throw LockedError("output directory " + dir.string() +
                      " is in use by another run (delete " + path_.string() + " if it is stale)");
  const std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] const auto n = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

DirectoryLock::~DirectoryLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

void tune_allocator() {
#ifdef M_MMAP_THRESHOLD
  mallopt(M_MMAP_THRESHOLD, 32 << 20);
  mallopt(M_TRIM_THRESHOLD, 256 << 20);
#endif
}

// ----------------------------------------------------------------- verbs

bool VerbResult::all_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

namespace {

using CheckFn = std::function<void(const ExperimentConfig&, const std::vector<eval::MetricRecord>&,
                                   std::vector<Check>&)>;

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + p.string());
  out << text;
  if (!out) throw IoError("write failed for " + p.string());
}

std::string plan_text(const std::string& verb, const ExperimentConfig& config,
                      const PreparedData& prepared, const std::vector<CellSpec>& cells) {
  std::ostringstream out;
  const ae::AEArchitecture arch{prepared.feature_dim, config.encoder_dims};
  const std::size_t ae_params = nn::FlatParams::zeros_for(arch.layers()).size();
  out << "verb " << verb << ": dataset " << prepared.dataset_name << " (" << prepared.feature_dim
      << " features, fingerprint " << prepared.fingerprint << ")\n";
  out << "  runs: " << config.seeds.size() << " seeds x " << cells.size() << " configurations\n";
  out << "  target autoencoder: " << ae_params << " parameters\n";
  const std::size_t heldback = prepared.splits.heldback_normals.size() +
                               (config.include_ae_normals ? prepared.splits.ae_train_normals.size() : 0);
  for (const auto& c : cells) {
    const auto layers = alarm_arch_for(config, ae_params).layers(c.n_snapshots);
    const std::size_t alarm_params = nn::FlatParams::zeros_for(layers).size();
    const std::size_t n = heldback + static_cast<std::size_t>(c.scenario.known_anomaly_budget);
    const std::size_t batch = std::min<std::size_t>(config.alarm_train.batch_size, n);
    out << "  [" << c.label << "] AE epochs " << schedule_for(config, c.n_snapshots).total_epochs()
        << ", snapshots " << c.n_snapshots << ", alarm " << alarm_params << " parameters, "
        << config.alarm_train.epochs << " epochs x " << n / batch << " steps, gradient cache ~"
        << gradseq::estimate_cache_bytes(n, c.n_snapshots, ae_params) / 1024 << " KiB\n";
  }
  out << "  output: " << (resolve_output(config.output) / verb).string() << "\n";
  return out.str();
}

void structural_checks(const std::vector<eval::MetricRecord>& records, std::size_t expected,
                       std::vector<Check>& checks) {
  bool finite = true;
  bool hashes = true;
  for (const auto& r : records) {
    finite &= std::isfinite(r.auc) && std::isfinite(r.ap) && r.auc >= 0 && r.auc <= 1 &&
              r.ap >= 0 && r.ap <= 1;
    hashes &= !r.dataset_fingerprint.empty() && !r.family_hash.empty() &&
              (r.method != kMethodR2AD2 || !r.alarm_hash.empty());
  }
  checks.push_back({"metrics finite and in [0,1]", finite, ""});
  checks.push_back({"records carry fingerprints and hashes", hashes, ""});
  checks.push_back({"record count", records.size() == expected,
                    std::to_string(records.size()) + " of " + std::to_string(expected)});
}

VerbResult run_verb(const std::string& verb, const ExperimentConfig& config,
                    const RunOptions& options, const std::vector<CellSpec>& cells,
                    std::size_t records_per_cell, const CheckFn& verb_checks) {
  config.validate();
  for (const auto& c : cells) c.scenario.validate();

  // Every seed's data and scenario are built before any training so supply
  // problems surface first.
  std::vector<PreparedData> prepared;
  for (std::uint64_t seed : config.seeds) {
    prepared.push_back(prepare_data(config, seed));
    for (const auto& c : cells) data::apply_scenario(prepared.back().splits, c.scenario, seed);
  }

  VerbResult result;
  result.verb = verb;
  if (options.dry_run) {
    result.plan = plan_text(verb, config, prepared.front(), cells);
    return result;
  }

  std::optional<DirectoryLock> lock;
  std::ofstream log;
  if (options.write_files) {
    result.dir = resolve_output(config.output) / verb;
    fs::create_directories(result.dir);
    lock.emplace(result.dir);
    write_file(result.dir / "config.ini", to_text(config));
    log.open(result.dir / "run.log", std::ios::trunc);
  }

  for (const auto& c : cells) {
    for (std::size_t i = 0; i < config.seeds.size(); ++i) {
      const CellResult r = run_cell(config, prepared[i], c, config.seeds[i]);
      result.records.insert(result.records.end(), r.records.begin(), r.records.end());
      std::ostringstream line;
      line << c.label << " seed " << config.seeds[i] << ": " << fixed(r.seconds, 2) << " s, AE "
           << r.ae_params << " params, alarm " << r.alarm_params << " params, r2ad2 AUC "
           << fixed(r.records.front().auc);
      log_info(line.str());
      if (log) log << line.str() << "\n" << std::flush;
    }
  }

  structural_checks(result.records, cells.size() * config.seeds.size() * records_per_cell,
                    result.checks);
  verb_checks(config, result.records, result.checks);

  if (options.write_files) {
    std::string jsonl;
    for (const auto& r : result.records) jsonl += eval::to_json_line(r) + "\n";
    write_file(result.dir / "metrics.jsonl", jsonl);
    write_file(result.dir / "summary.csv", summary_csv(result.records));
    std::string checks;
    for (const auto& c : result.checks)
      checks += std::string(c.passed ? "PASS " : "FAIL ") + c.name +
                (c.detail.empty() ? "" : " (" + c.detail + ")") + "\n";
    write_file(result.dir / "checks.txt", checks);
  }
  return result;
}

std::size_t methods_per_cell(const ExperimentConfig& c) { return c.baselines ? 3 : 1; }

CellSpec base_cell(const ExperimentConfig& c, std::string label) {
  return {std::move(label), c.scenario, c.schedule.n_snapshots, false};
}

std::string rate_label(double r) { return "pollution=" + format_number(r); }

}  // namespace

VerbResult run_known(const ExperimentConfig& config, const RunOptions& options) {
  const auto checks = [](const ExperimentConfig& c, const std::vector<eval::MetricRecord>& recs,
                         std::vector<Check>& out) {
    if (!c.checks_enabled()) return;
    const double ours = mean_auc(recs, "known", kMethodR2AD2);
    out.push_back({"r2ad2 mean AUC >= " + format_number(c.checks.known_min_auc),
                   ours >= c.checks.known_min_auc, fixed(ours)});
    if (c.baselines) {
      const double ae = mean_auc(recs, "known", kMethodAE);
      out.push_back({"r2ad2 mean AUC >= AE mean AUC", ours >= ae,
                     fixed(ours) + " vs " + fixed(ae)});
    }
  };
  return run_verb("known", config, options, {base_cell(config, "known")},
                  methods_per_cell(config), checks);
}

VerbResult run_pollution(const ExperimentConfig& config, const RunOptions& options) {
  std::vector<CellSpec> cells;
  for (double r : config.pollution_rates) {
    CellSpec c = base_cell(config, rate_label(r));
    c.scenario.pollution_rate = r;
    cells.push_back(c);
  }
  const auto checks = [](const ExperimentConfig& c, const std::vector<eval::MetricRecord>& recs,
                         std::vector<Check>& out) {
    if (!c.checks_enabled()) return;
    const bool has_zero =
        std::find(c.pollution_rates.begin(), c.pollution_rates.end(), 0.0) != c.pollution_rates.end();
    if (!has_zero) return;
    const double clean = mean_auc(recs, rate_label(0), kMethodR2AD2);
    for (double r : c.pollution_rates) {
      if (r <= 0 || r > 0.1) continue;
      const double polluted = mean_auc(recs, rate_label(r), kMethodR2AD2);
      out.push_back({"r2ad2 AUC at pollution " + format_number(r) + " >= clean AUC - " +
                         format_number(c.checks.pollution_max_drop),
                     polluted >= clean - c.checks.pollution_max_drop,
                     fixed(polluted) + " vs " + fixed(clean)});
    }
  };
  return run_verb("pollution", config, options, cells, methods_per_cell(config), checks);
}

VerbResult run_budget(const ExperimentConfig& config, const RunOptions& options) {
  std::vector<int> budgets = config.budgets;
  std::sort(budgets.begin(), budgets.end());
  budgets.erase(std::unique(budgets.begin(), budgets.end()), budgets.end());
  std::vector<CellSpec> cells;
  for (int b : budgets) {
    if (b == 0)
      log_warn("budget 0: the alarm sees synthetic anomalies only (degenerate semi-supervision)");
    CellSpec c = base_cell(config, "budget=" + std::to_string(b));
    c.scenario.known_anomaly_budget = b;
    c.scenario.pollution_rate = 0.0;
    cells.push_back(c);
  }
  if (config.scenario.pollution_rate > 0)
    log_warn("the budget sweep runs on unpolluted data; scenario.pollution is ignored");
  const auto checks = [budgets](const ExperimentConfig& c,
                                const std::vector<eval::MetricRecord>& recs,
                                std::vector<Check>& out) {
    if (c.baselines) {
      // The unsupervised baseline never sees the labelled anomalies.
      std::map<std::uint64_t, std::set<double>> per_seed;
      for (const auto& r : recs)
        if (r.method == kMethodAE) per_seed[r.seed].insert(r.auc);
      const bool constant = std::all_of(per_seed.begin(), per_seed.end(),
                                        [](const auto& kv) { return kv.second.size() == 1; });
      out.push_back({"AE AUC identical across budgets", constant, ""});
    }
    if (!c.checks_enabled() || !c.baselines) return;
    if (std::find(budgets.begin(), budgets.end(), 10) == budgets.end()) return;
    const double ours = mean_auc(recs, "budget=10", kMethodR2AD2);
    const double ae = mean_auc(recs, "budget=10", kMethodAE);
    out.push_back({"r2ad2 AUC at budget 10 >= AE AUC", ours >= ae, fixed(ours) + " vs " + fixed(ae)});
  };
  return run_verb("budget", config, options, cells, methods_per_cell(config), checks);
}

VerbResult run_transfer(const ExperimentConfig& config, const RunOptions& options) {
  CellSpec cell = base_cell(config, "transfer");
  cell.per_class = true;
  const auto& train = config.scenario.train_anomaly_classes;
  const auto& test = config.scenario.test_anomaly_classes;
  if (train.empty())
    throw UsageError("run-transfer needs scenario.train_classes (e.g. --set scenario.train_classes=A)");
  if (train == test)
    log_warn("training and test anomaly classes coincide; transfer degenerates to run-known");

  // Per-class rows: one per test class present, so the count is data dependent.
  std::set<std::string> present;
  {
    const PreparedData p = prepare_data(config, config.seeds.front());
    for (const auto& s : p.splits.test)
      if (s.label == 1 && (test.empty() || test.contains(s.anomaly_class)))
        present.insert(s.anomaly_class);
  }
  const std::size_t per_cell = methods_per_cell(config) * (1 + present.size());

  const auto checks = [train, present](const ExperimentConfig& c,
                                       const std::vector<eval::MetricRecord>& recs,
                                       std::vector<Check>& out) {
    // Leak audit: no training row may carry an unseen class, hidden or not.
    bool clean = true;
    for (std::uint64_t seed : c.seeds) {
      const PreparedData p = prepare_data(c, seed);
      const data::ScenarioData sd = data::apply_scenario(p.splits, c.scenario, seed);
      for (const auto* part : {&sd.ae_train, &sd.heldback_normals, &sd.known_anomalies})
        for (const auto& s : *part)
          if (s.is_true_anomaly() && !train.empty() && !train.contains(s.true_class)) clean = false;
    }
    out.push_back({"training rows hold no unseen anomaly class", clean, ""});
    if (!c.checks_enabled()) return;
    for (const auto& cls : present) {
      if (train.empty() || train.contains(cls)) continue;
      const double auc = mean_auc(recs, "transfer" + kPerClassTag + cls, kMethodR2AD2);
      out.push_back({"r2ad2 AUC on unseen class " + cls + " > " +
                         format_number(c.checks.transfer_min_auc),
                     auc > c.checks.transfer_min_auc, fixed(auc)});
    }
  };
  return run_verb("transfer", config, options, {cell}, per_cell, checks);
}

VerbResult run_ablation(const ExperimentConfig& config, const RunOptions& options) {
  std::vector<CellSpec> cells;
  for (int k : config.step_counts) {
    if (k < 1) throw ConfigError("sweep.step_counts: step counts must be at least 1");
    CellSpec c = base_cell(config, "steps=" + std::to_string(k));
    c.n_snapshots = k;
    cells.push_back(c);
  }
  const auto checks = [](const ExperimentConfig& c, const std::vector<eval::MetricRecord>& recs,
                         std::vector<Check>& out) {
    bool dense = true;
    for (int k : c.step_counts)
      if (k == 1)
        for (const auto& l : alarm_arch_for(c, 1).layers(1))
          dense &= l.kind != nn::LayerKind::Lstm;
    out.push_back({"single-step alarm uses dense layers only", dense, ""});
    if (!c.checks_enabled()) return;
    const auto& k = c.step_counts;
    if (std::find(k.begin(), k.end(), 1) == k.end() || std::find(k.begin(), k.end(), 3) == k.end())
      return;
    const double one = mean_auc(recs, "steps=1", kMethodR2AD2);
    const double three = mean_auc(recs, "steps=3", kMethodR2AD2);
    out.push_back({"r2ad2 AUC with 3 steps >= AUC with 1 step - " +
                       format_number(c.checks.ablation_tolerance),
                   three >= one - c.checks.ablation_tolerance, fixed(three) + " vs " + fixed(one)});
  };
  if (config.step_counts.empty()) throw ConfigError("sweep.step_counts: no step counts given");
  ExperimentConfig c = config;
  // validate() checks the alarm against the configured snapshot count; the
  // sweep overrides it per cell.
  c.schedule.n_snapshots = *std::max_element(config.step_counts.begin(), config.step_counts.end());
  return run_verb("ablation", c, options, cells, methods_per_cell(config), checks);
}

}  // namespace r2ad2::experiment
