// Command-line front end: model training, scoring and the experiment verbs.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "r2ad2/alarm/alarm.hpp"
#include "r2ad2/error.hpp"
#include "r2ad2/eval/metrics.hpp"
#include "r2ad2/experiment/runner.hpp"
#include "r2ad2/hash.hpp"
#include "r2ad2/log.hpp"

namespace fs = std::filesystem;
using namespace r2ad2;
using namespace r2ad2::experiment;

namespace {

enum Exit { kOk = 0, kFailure = 1, kBadConfig = 2, kCheckFailed = 3, kLocked = 4 };

struct CommonArgs {
  std::string config;
  std::vector<std::string> sets;
  std::string output, seeds, dataset, csv, schema;
  int epochs = -1;
  bool dry_run = false;
  bool quiet = false;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("-c,--config", a.config, "INI config file (defaults apply when omitted)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--set", a.sets, "override a config key: section.key=value (repeatable)");
  cmd->add_option("-o,--output", a.output, "output directory (run.output)");
  cmd->add_option("--seeds", a.seeds, "comma-separated run seeds (run.seeds)");
  cmd->add_option("--dataset", a.dataset, "builtin synthetic dataset (data.synthetic)");
  cmd->add_option("--csv", a.csv, "CSV dataset (data.csv)");
  cmd->add_option("--schema", a.schema, "schema file for --csv (data.schema)");
  cmd->add_option("--epochs", a.epochs, "alarm training epochs (alarm.epochs)");
  cmd->add_flag("--dry-run", a.dry_run, "validate and print the plan; write nothing");
  cmd->add_flag("-q,--quiet", a.quiet, "suppress progress messages");
}

ExperimentConfig resolve_config(const CommonArgs& a) {
  std::vector<std::string> sets;
  if (!a.dataset.empty()) sets.push_back("data.synthetic=" + a.dataset);
  if (!a.csv.empty()) sets.push_back("data.csv=" + a.csv);
  if (!a.schema.empty()) sets.push_back("data.schema=" + a.schema);
  if (!a.output.empty()) sets.push_back("run.output=" + a.output);
  if (!a.seeds.empty()) sets.push_back("run.seeds=" + a.seeds);
  if (a.epochs >= 0) sets.push_back("alarm.epochs=" + std::to_string(a.epochs));
  sets.insert(sets.end(), a.sets.begin(), a.sets.end());
  ExperimentConfig c = a.config.empty() ? with_overrides(ExperimentConfig{}, sets)
                                        : load_config(a.config, sets);
  c.validate();
  return c;
}

int report_checks(const VerbResult& r) {
  std::cout << report(r.records);
  std::cout << "\nchecks\n";
  for (const auto& c : r.checks)
    std::cout << "  " << (c.passed ? "PASS " : "FAIL ") << c.name
              << (c.detail.empty() ? "" : " (" + c.detail + ")") << "\n";
  if (!r.dir.empty()) std::cout << "\noutputs in " << r.dir.string() << "\n";
  return r.all_passed() ? kOk : kCheckFailed;
}

int run_experiment(VerbResult (*verb)(const ExperimentConfig&, const RunOptions&),
                   const CommonArgs& a) {
  const ExperimentConfig c = resolve_config(a);
  RunOptions o;
  o.dry_run = a.dry_run;
  const VerbResult r = verb(c, o);
  if (a.dry_run) {
    std::cout << r.plan;
    return kOk;
  }
  return report_checks(r);
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::trunc);
  if (!out) throw IoError("cannot write " + p.string());
  out << text;
}

fs::path stage_dir(const ExperimentConfig& c, const std::string& stage) {
  return resolve_output(c.output) / stage;
}

// ------------------------------------------------------------ model verbs

int train_target(const CommonArgs& a, std::uint64_t seed) {
  const ExperimentConfig c = resolve_config(a);
  const PreparedData p = prepare_data(c, seed);
  const data::ScenarioData sd = data::apply_scenario(p.splits, c.scenario, seed);
  const ae::AEArchitecture arch{p.feature_dim, c.encoder_dims};
  if (a.dry_run) {
    std::cout << "train-target: " << sd.ae_train.size() << " normals, "
              << nn::FlatParams::zeros_for(arch.layers()).size() << " parameters, snapshots at epochs";
    for (int e : c.schedule.epochs()) std::cout << " " << e;
    std::cout << "\n  output: " << stage_dir(c, "target").string() << "\n";
    return kOk;
  }
  const fs::path dir = stage_dir(c, "target");
  fs::create_directories(dir);
  DirectoryLock lock(dir);
  ae::SnapshotFamily family =
      ae::train_target_family(arch, data::features(sd.ae_train), c.schedule, seed, c.ae_train);
  family.set_dataset_fingerprint(data::dataset_fingerprint(sd.ae_train));
  ae::save_family(family, dir / "family");
  data::write_samples_csv(sd.test, dir / "test.csv");
  write_text(dir / "config.ini", to_text(c));
  write_text(dir / "seed", std::to_string(seed) + "\n");
  std::cout << "family " << to_hex(family.manifest_hash()) << ": " << family.size()
            << " snapshots, final reconstruction loss " << family.epoch_losses().back() << "\n"
            << "saved to " << (dir / "family").string() << "\n";
  return kOk;
}

int train_alarm_verb(const CommonArgs& a, std::uint64_t seed, std::string family_dir,
                     const std::string& gradients) {
  const ExperimentConfig c = resolve_config(a);
  if (family_dir.empty()) family_dir = (stage_dir(c, "target") / "family").string();
  const ae::SnapshotFamily family = ae::load_family(family_dir);
  const PreparedData p = prepare_data(c, seed);
  const data::ScenarioData sd = data::apply_scenario(p.splits, c.scenario, seed);
  if (family.dataset_fingerprint() != data::dataset_fingerprint(sd.ae_train))
    throw ConfigError("family in " + family_dir +
                      " was trained on different data (check the config and --seed)");
  const data::Dataset train = sd.alarm_train(c.include_ae_normals);
  const alarm::TrainSet set{data::features(train), data::labels(train)};
  const alarm::AlarmArchitecture arch{static_cast<int>(family.param_count()), c.alarm_dims,
                                      c.alarm_recurrent};
  if (a.dry_run) {
    std::cout << "train-alarm: " << set.labels.size() << " rows ("
              << std::count(set.labels.begin(), set.labels.end(), 1) << " anomalous), "
              << nn::FlatParams::zeros_for(arch.layers(family.size())).size()
              << " alarm parameters, " << c.alarm_train.epochs << " epochs\n"
              << "  output: " << stage_dir(c, "alarm").string() << "\n";
    return kOk;
  }
  const fs::path dir = stage_dir(c, "alarm");
  fs::create_directories(dir);
  DirectoryLock lock(dir);
  const alarm::AlarmModel model = alarm::train_alarm(arch, family, set, seed, c.alarm_train);
  alarm::save_alarm(model, dir);
  write_text(dir / "config.ini", to_text(c));
  if (!gradients.empty()) {
    const auto seqs = gradseq::extract_batch(family, set.features, c.alarm_train.cache_policy,
                                             c.alarm_train.cache_capacity);
    gradseq::write_gradient_cache(gradients,
                                  {data::dataset_fingerprint(train), to_hex(family.manifest_hash())},
                                  seqs);
    std::cout << "gradients written to " << gradients << "\n";
  }
  std::cout << "alarm " << to_hex(model.hash()) << ": " << model.history.steps
            << " steps, final real BXE " << model.history.real_loss.back() << "\n"
            << "saved to " << dir.string() << "\n";
  return kOk;
}

int score_verb(const CommonArgs& a, std::string family_dir, std::string alarm_dir,
               std::string input, std::string out_path) {
  const ExperimentConfig c = resolve_config(a);
  if (family_dir.empty()) family_dir = (stage_dir(c, "target") / "family").string();
  if (alarm_dir.empty()) alarm_dir = stage_dir(c, "alarm").string();
  if (input.empty()) input = (stage_dir(c, "target") / "test.csv").string();
  if (out_path.empty()) out_path = (stage_dir(c, "score") / "scores.csv").string();
  const ae::SnapshotFamily family = ae::load_family(family_dir);
  const alarm::AlarmModel model = alarm::load_alarm(alarm_dir, family);
  const data::Dataset samples = data::read_samples_csv(input);
  if (a.dry_run) {
    std::cout << "score: " << samples.size() << " rows from " << input << " -> " << out_path << "\n";
    return kOk;
  }
  const nn::Matrix x = data::features(samples);
  const std::vector<int> y = data::labels(samples);
  const auto ours = alarm::score_inputs(model, family, x);
  const auto ae = ae::reconstruction_scores(family, x);

  fs::create_directories(fs::path(out_path).parent_path());
  std::string csv = "row,label,r2ad2,ae\n";
  char line[128];
  for (std::size_t i = 0; i < samples.size(); ++i) {
    std::snprintf(line, sizeof line, "%zu,%d,%.17g,%.17g\n", i, y[i], ours[i], ae[i]);
    csv += line;
  }
  write_text(out_path, csv);
  const auto positives = std::count(y.begin(), y.end(), 1);
  if (positives > 0 && positives < static_cast<long>(y.size()))
    std::cout << "AUC r2ad2 " << eval::auc_roc(y, ours) << ", ae " << eval::auc_roc(y, ae) << "\n";
  std::cout << samples.size() << " scores written to " << out_path << "\n";
  return kOk;
}

int report_verb(const std::vector<std::string>& inputs, const std::string& out) {
  std::vector<eval::MetricRecord> records;
  for (const auto& in : inputs) {
    fs::path p = in;
    if (fs::is_directory(p)) p /= "metrics.jsonl";
    const auto r = read_metrics(p);
    records.insert(records.end(), r.begin(), r.end());
  }
  if (records.empty()) throw UsageError("no metric records found");
  const std::string text = report(records);
  std::cout << text;
  if (!out.empty()) write_text(out, text);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"r2ad2: gradient-sequence anomaly detection"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "r2ad2 1.0");

  CommonArgs common;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string family_dir, alarm_dir, input, out, gradients;
  std::vector<std::string> report_inputs;

  auto* target = app.add_subcommand("train-target", "train the autoencoder snapshot family");
  auto* alarm_cmd = app.add_subcommand("train-alarm", "train the alarm network on a family");
  auto* score = app.add_subcommand("score", "score processed samples with a trained pair");
  for (auto* cmd : {target, alarm_cmd, score}) {
    add_common(cmd, common);
    cmd->add_option("--seed", seed, "run seed (default: first of run.seeds)")
        ->each([&](const std::string&) { seed_given = true; });
  }
  alarm_cmd->add_option("--family", family_dir, "family directory (default <output>/target/family)");
  alarm_cmd->add_option("--export-gradients", gradients, "also write the training gradients to this file");
  score->add_option("--family", family_dir, "family directory");
  score->add_option("--alarm", alarm_dir, "alarm directory (default <output>/alarm)");
  score->add_option("--input", input, "processed samples CSV (default <output>/target/test.csv)");
  score->add_option("--out", out, "scores CSV (default <output>/score/scores.csv)");

  struct Verb {
    const char* name;
    const char* help;
    VerbResult (*fn)(const ExperimentConfig&, const RunOptions&);
  };
  const Verb verbs[] = {
      {"run-known", "known-anomaly experiment with baselines", run_known},
      {"run-pollution", "sweep the training-data pollution rate", run_pollution},
      {"run-budget", "sweep the known-anomaly budget", run_budget},
      {"run-transfer", "train on some anomaly classes, test on all", run_transfer},
      {"run-ablation", "sweep the number of snapshots", run_ablation},
  };
  std::vector<std::pair<CLI::App*, const Verb*>> experiment_cmds;
  for (const auto& v : verbs) {
    auto* cmd = app.add_subcommand(v.name, v.help);
    add_common(cmd, common);
    experiment_cmds.emplace_back(cmd, &v);
  }

  auto* report_cmd = app.add_subcommand("report", "summarise metrics.jsonl files");
  report_cmd->add_option("inputs", report_inputs, "run directories or metrics.jsonl files")
      ->required();
  report_cmd->add_option("--out", out, "also write the report to this file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kBadConfig;
  }

  if (common.quiet) set_log_sink([](const std::string&) {});
  try {
    auto first_seed = [&] {
      return seed_given ? seed : resolve_config(common).seeds.front();
    };
    if (target->parsed()) return train_target(common, first_seed());
    if (alarm_cmd->parsed()) return train_alarm_verb(common, first_seed(), family_dir, gradients);
    if (score->parsed()) return score_verb(common, family_dir, alarm_dir, input, out);
    if (report_cmd->parsed()) return report_verb(report_inputs, out);
    for (const auto& [cmd, verb] : experiment_cmds)
      if (cmd->parsed()) return run_experiment(verb->fn, common);
  } catch (const LockedError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kLocked;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kBadConfig;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kBadConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}
