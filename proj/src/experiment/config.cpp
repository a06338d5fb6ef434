#include "r2ad2/experiment/config.hpp"

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "r2ad2/error.hpp"

namespace r2ad2::experiment {

namespace {

using Getter = std::function<std::string(const ExperimentConfig&)>;
using Setter = std::function<void(ExperimentConfig&, const std::string&)>;

struct Field {
  std::string section, key;
  Getter get;
  Setter set;
  std::string path() const { return section + "." + key; }
};

// -- value codecs

std::string bad(const std::string& what, const std::string& v) {
  return "expected " + what + ", got '" + v + "'";
}

long long to_int(const std::string& v) {
  long long out = 0;
  const auto* end = v.data() + v.size();
  const auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw ConfigError(bad("an integer", v));
  return out;
}

std::uint64_t to_u64(const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  const auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw ConfigError(bad("a non-negative integer", v));
  return out;
}

double to_double(const std::string& v) {
  double out = 0;
  const auto* end = v.data() + v.size();
  const auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw ConfigError(bad("a number", v));
  return out;
}

bool to_bool(const std::string& v) {
  const std::string s = boost::to_lower_copy(v);
  if (s == "true" || s == "yes" || s == "1" || s == "on") return true;
  if (s == "false" || s == "no" || s == "0" || s == "off") return false;
  throw ConfigError(bad("true or false", v));
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> parts;
  if (boost::trim_copy(v).empty()) return parts;
  boost::split(parts, v, boost::is_any_of(","));
  for (auto& p : parts) boost::trim(p);
  return parts;
}

template <class T, class F>
std::vector<T> to_list(const std::string& v, F convert) {
  std::vector<T> out;
  for (const auto& p : split_list(v)) out.push_back(static_cast<T>(convert(p)));
  return out;
}

template <class T, class F>
std::string join(const std::vector<T>& v, F format) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + format(v[i]);
  return s;
}

std::string join_set(const std::set<std::string>& v) {
  return boost::algorithm::join(std::vector<std::string>(v.begin(), v.end()), ", ");
}

std::string int_str(long long v) { return std::to_string(v); }
std::string bool_str(bool b) { return b ? "true" : "false"; }

// -- the key table

std::vector<Field> build_fields() {
  std::vector<Field> f;
  auto add = [&](std::string section, std::string key, Getter g, Setter s) {
    f.push_back({std::move(section), std::move(key), std::move(g), std::move(s)});
  };
  using C = ExperimentConfig;
  using S = const std::string&;

  add("experiment", "name", [](const C& c) { return c.name; }, [](C& c, S v) { c.name = v; });

  add("data", "synthetic", [](const C& c) { return c.data.synthetic; },
      [](C& c, S v) {
        c.data.synthetic = v;
        if (!v.empty()) c.data.csv.clear();
      });
  // Naming a CSV file switches the default generator off.
  add("data", "csv", [](const C& c) { return c.data.csv.string(); },
      [](C& c, S v) {
        c.data.csv = v;
        if (!v.empty()) c.data.synthetic.clear();
      });
  add("data", "schema", [](const C& c) { return c.data.schema.string(); },
      [](C& c, S v) { c.data.schema = v; });
  add("data", "n_normals", [](const C& c) { return int_str(c.data.generator.n_normals); },
      [](C& c, S v) { c.data.generator.n_normals = int(to_int(v)); });
  add("data", "n_anomalies", [](const C& c) { return int_str(c.data.generator.n_anomalies); },
      [](C& c, S v) { c.data.generator.n_anomalies = int(to_int(v)); });
  add("data", "dim", [](const C& c) { return int_str(c.data.generator.dim); },
      [](C& c, S v) { c.data.generator.dim = int(to_int(v)); });
  add("data", "seed", [](const C& c) { return std::to_string(c.data.generator.seed); },
      [](C& c, S v) { c.data.generator.seed = to_u64(v); });
  add("data", "blob_std", [](const C& c) { return format_number(c.data.generator.blob_std); },
      [](C& c, S v) { c.data.generator.blob_std = to_double(v); });
  add("data", "shell_inner",
      [](const C& c) { return format_number(c.data.generator.shell_inner); },
      [](C& c, S v) { c.data.generator.shell_inner = to_double(v); });
  add("data", "shell_outer",
      [](const C& c) { return format_number(c.data.generator.shell_outer); },
      [](C& c, S v) { c.data.generator.shell_outer = to_double(v); });

  add("split", "train", [](const C& c) { return format_number(c.split.train_frac); },
      [](C& c, S v) { c.split.train_frac = to_double(v); });
  add("split", "val", [](const C& c) { return format_number(c.split.val_frac); },
      [](C& c, S v) { c.split.val_frac = to_double(v); });
  add("split", "test", [](const C& c) { return format_number(c.split.test_frac); },
      [](C& c, S v) { c.split.test_frac = to_double(v); });
  add("split", "ae_fraction", [](const C& c) { return format_number(c.split.ae_frac_of_train); },
      [](C& c, S v) { c.split.ae_frac_of_train = to_double(v); });
  add("split", "seed", [](const C& c) { return std::to_string(c.split.seed); },
      [](C& c, S v) { c.split.seed = to_u64(v); });
  add("split", "resplit_per_run", [](const C& c) { return bool_str(c.resplit_per_run); },
      [](C& c, S v) { c.resplit_per_run = to_bool(v); });

  add("scenario", "budget", [](const C& c) { return int_str(c.scenario.known_anomaly_budget); },
      [](C& c, S v) { c.scenario.known_anomaly_budget = int(to_int(v)); });
  add("scenario", "pollution", [](const C& c) { return format_number(c.scenario.pollution_rate); },
      [](C& c, S v) { c.scenario.pollution_rate = to_double(v); });
  add("scenario", "pollute_heldback", [](const C& c) { return bool_str(c.scenario.pollute_heldback); },
      [](C& c, S v) { c.scenario.pollute_heldback = to_bool(v); });
  add("scenario", "train_classes", [](const C& c) { return join_set(c.scenario.train_anomaly_classes); },
      [](C& c, S v) {
        const auto l = split_list(v);
        c.scenario.train_anomaly_classes = {l.begin(), l.end()};
      });
  add("scenario", "test_classes", [](const C& c) { return join_set(c.scenario.test_anomaly_classes); },
      [](C& c, S v) {
        const auto l = split_list(v);
        c.scenario.test_anomaly_classes = {l.begin(), l.end()};
      });
  add("scenario", "include_ae_normals", [](const C& c) { return bool_str(c.include_ae_normals); },
      [](C& c, S v) { c.include_ae_normals = to_bool(v); });

  add("target", "encoder", [](const C& c) { return join(c.encoder_dims, int_str); },
      [](C& c, S v) { c.encoder_dims = to_list<int>(v, to_int); });
  add("target", "t0", [](const C& c) { return int_str(c.schedule.t0); },
      [](C& c, S v) { c.schedule.t0 = int(to_int(v)); });
  add("target", "t", [](const C& c) { return int_str(c.schedule.t); },
      [](C& c, S v) { c.schedule.t = int(to_int(v)); });
  add("target", "snapshots", [](const C& c) { return int_str(c.schedule.n_snapshots); },
      [](C& c, S v) { c.schedule.n_snapshots = int(to_int(v)); });
  add("target", "batch_size", [](const C& c) { return int_str(c.ae_train.batch_size); },
      [](C& c, S v) { c.ae_train.batch_size = int(to_int(v)); });
  add("target", "lr", [](const C& c) { return format_number(c.ae_train.lr); },
      [](C& c, S v) { c.ae_train.lr = to_double(v); });

  add("alarm", "dims", [](const C& c) { return join(c.alarm_dims, int_str); },
      [](C& c, S v) { c.alarm_dims = to_list<int>(v, to_int); });
  add("alarm", "recurrent", [](const C& c) { return int_str(c.alarm_recurrent); },
      [](C& c, S v) { c.alarm_recurrent = int(to_int(v)); });
  add("alarm", "epochs", [](const C& c) { return int_str(c.alarm_train.epochs); },
      [](C& c, S v) { c.alarm_train.epochs = int(to_int(v)); });
  add("alarm", "lr", [](const C& c) { return format_number(c.alarm_train.lr); },
      [](C& c, S v) { c.alarm_train.lr = to_double(v); });
  add("alarm", "batch_size", [](const C& c) { return int_str(c.alarm_train.batch_size); },
      [](C& c, S v) { c.alarm_train.batch_size = int(to_int(v)); });
  add("alarm", "oversample", [](const C& c) { return bool_str(c.alarm_train.oversample_anomalies); },
      [](C& c, S v) { c.alarm_train.oversample_anomalies = to_bool(v); });
  add("alarm", "synthetic_norm",
      [](const C& c) {
        return c.alarm_train.synthetic_norm == alarm::SyntheticNorm::RunningStatistics ? "running"
                                                                                      : "batch";
      },
      [](C& c, S v) {
        if (v == "running")
          c.alarm_train.synthetic_norm = alarm::SyntheticNorm::RunningStatistics;
        else if (v == "batch")
          c.alarm_train.synthetic_norm = alarm::SyntheticNorm::BatchStatistics;
        else
          throw ConfigError(bad("running or batch", v));
      });
  add("alarm", "bn_epsilon", [](const C& c) { return format_number(c.alarm_train.bn.epsilon); },
      [](C& c, S v) { c.alarm_train.bn.epsilon = to_double(v); });
  add("alarm", "bn_momentum", [](const C& c) { return format_number(c.alarm_train.bn.momentum); },
      [](C& c, S v) { c.alarm_train.bn.momentum = to_double(v); });
  add("alarm", "cache",
      [](const C& c) {
        return c.alarm_train.cache_policy == gradseq::CachePolicy::PrecomputeAll ? "precompute"
                                                                                 : "on_the_fly";
      },
      [](C& c, S v) {
        if (v == "precompute")
          c.alarm_train.cache_policy = gradseq::CachePolicy::PrecomputeAll;
        else if (v == "on_the_fly")
          c.alarm_train.cache_policy = gradseq::CachePolicy::OnTheFly;
        else
          throw ConfigError(bad("precompute or on_the_fly", v));
      });
  add("alarm", "cache_capacity_mb",
      [](const C& c) { return std::to_string(c.alarm_train.cache_capacity >> 20); },
      [](C& c, S v) { c.alarm_train.cache_capacity = std::size_t(to_u64(v)) << 20; });

  add("run", "seeds", [](const C& c) { return join(c.seeds, [](auto s) { return std::to_string(s); }); },
      [](C& c, S v) { c.seeds = to_list<std::uint64_t>(v, to_u64); });
  add("run", "n_runs", [](const C& c) { return std::to_string(c.seeds.size()); },
      [](C& c, S v) {
        const auto n = to_u64(v);
        c.seeds.clear();
        for (std::uint64_t s = 0; s < n; ++s) c.seeds.push_back(s);
      });
  add("run", "output", [](const C& c) { return c.output.string(); },
      [](C& c, S v) { c.output = v; });
  add("run", "baselines", [](const C& c) { return bool_str(c.baselines); },
      [](C& c, S v) { c.baselines = to_bool(v); });

  add("sweep", "pollution_rates", [](const C& c) { return join(c.pollution_rates, format_number); },
      [](C& c, S v) { c.pollution_rates = to_list<double>(v, to_double); });
  add("sweep", "budgets", [](const C& c) { return join(c.budgets, int_str); },
      [](C& c, S v) { c.budgets = to_list<int>(v, to_int); });
  add("sweep", "step_counts", [](const C& c) { return join(c.step_counts, int_str); },
      [](C& c, S v) { c.step_counts = to_list<int>(v, to_int); });

  add("checks", "mode",
      [](const C& c) {
        switch (c.checks.mode) {
          case ChecksMode::On: return "on";
          case ChecksMode::Off: return "off";
          default: return "auto";
        }
      },
      [](C& c, S v) {
        if (v == "auto") c.checks.mode = ChecksMode::Auto;
        else if (v == "on") c.checks.mode = ChecksMode::On;
        else if (v == "off") c.checks.mode = ChecksMode::Off;
        else throw ConfigError(bad("auto, on or off", v));
      });
  add("checks", "known_min_auc", [](const C& c) { return format_number(c.checks.known_min_auc); },
      [](C& c, S v) { c.checks.known_min_auc = to_double(v); });
  add("checks", "pollution_max_drop",
      [](const C& c) { return format_number(c.checks.pollution_max_drop); },
      [](C& c, S v) { c.checks.pollution_max_drop = to_double(v); });
  add("checks", "ablation_tolerance",
      [](const C& c) { return format_number(c.checks.ablation_tolerance); },
      [](C& c, S v) { c.checks.ablation_tolerance = to_double(v); });
  add("checks", "transfer_min_auc",
      [](const C& c) { return format_number(c.checks.transfer_min_auc); },
      [](C& c, S v) { c.checks.transfer_min_auc = to_double(v); });
  return f;
}

const std::vector<Field>& fields() {
  static const std::vector<Field> f = build_fields();
  return f;
}

// `n_runs` is an input shorthand; `seeds` is what gets archived.
bool archived(const Field& f) { return f.path() != "run.n_runs"; }

const Field& find_field(const std::string& path) {
  for (const auto& f : fields())
    if (f.path() == path) return f;
  throw ConfigError("unknown config key '" + path + "'");
}

void apply(ExperimentConfig& c, const std::string& path, const std::string& value) {
  try {
    find_field(path).set(c, value);
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    if (msg.rfind("unknown config key", 0) == 0) throw;
    throw ConfigError(path + ": " + msg);
  }
}

std::pair<std::string, std::string> split_override(const std::string& o) {
  const auto eq = o.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override '" + o + "' is not of the form section.key=value");
  return {boost::trim_copy(o.substr(0, eq)), boost::trim_copy(o.substr(eq + 1))};
}

}  // namespace

std::string format_number(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

std::string DataConfig::display_name() const {
  return synthetic.empty() ? csv.stem().string() : synthetic;
}

bool ExperimentConfig::checks_enabled() const {
  if (checks.mode == ChecksMode::Auto) return !data.synthetic.empty();
  return checks.mode == ChecksMode::On;
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& key, const std::string& msg) {
    throw ConfigError(key + ": " + msg);
  };
  if (data.synthetic.empty() == data.csv.empty())
    fail("data", "set exactly one of data.synthetic and data.csv");
  if (!data.synthetic.empty()) {
    const auto names = data::synthetic_names();
    if (std::find(names.begin(), names.end(), data.synthetic) == names.end())
      fail("data.synthetic", "unknown generator '" + data.synthetic + "'");
    if (data.generator.n_normals < 1 || data.generator.n_anomalies < 0)
      fail("data.n_normals", "sample counts must be positive");
    if (data.generator.dim < 2) fail("data.dim", "must be at least 2");
  } else if (data.schema.empty()) {
    fail("data.schema", "a CSV dataset needs a schema file");
  }
  split.validate();
  scenario.validate();
  ae::AEArchitecture{2, encoder_dims}.validate();
  schedule.validate();
  if (ae_train.batch_size < 1) fail("target.batch_size", "must be positive");
  if (!(ae_train.lr > 0)) fail("target.lr", "must be positive");
  alarm::AlarmArchitecture{1, alarm_dims, alarm_recurrent}.validate(schedule.n_snapshots);
  if (alarm_train.epochs < 0) fail("alarm.epochs", "must be non-negative");
  if (!(alarm_train.lr > 0)) fail("alarm.lr", "must be positive");
  if (alarm_train.batch_size < 2) fail("alarm.batch_size", "must be at least 2");
  if (!(alarm_train.bn.epsilon > 0)) fail("alarm.bn_epsilon", "must be positive");
  if (!(alarm_train.bn.momentum >= 0 && alarm_train.bn.momentum < 1))
    fail("alarm.bn_momentum", "must lie in [0, 1)");
  if (seeds.empty()) fail("run.seeds", "at least one seed is required");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size())
    fail("run.seeds", "seeds must be distinct");
  for (double r : pollution_rates)
    if (!(r >= 0 && r < 1)) fail("sweep.pollution_rates", "rates must lie in [0, 1)");
  for (int b : budgets)
    if (b < 0) fail("sweep.budgets", "budgets must be non-negative");
  for (int k : step_counts)
    if (k < 1) fail("sweep.step_counts", "step counts must be at least 1");
}

ExperimentConfig with_overrides(const ExperimentConfig& config,
                                const std::vector<std::string>& overrides) {
  ExperimentConfig c = config;
  for (const auto& o : overrides) {
    const auto [path, value] = split_override(o);
    apply(c, path, value);
  }
  return c;
}

ExperimentConfig parse_config(const std::string& text, const std::vector<std::string>& overrides) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("config line " + std::to_string(e.line()) + ": " + e.message());
  }
  ExperimentConfig c;
  for (const auto& [section, keys] : tree) {
    if (keys.empty() && !keys.data().empty())
      throw ConfigError("config key '" + section + "' is outside any section");
    for (const auto& [key, value] : keys) {
      apply(c, section + "." + key, value.data());
    }
  }
  return with_overrides(c, overrides);
}

ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), overrides);
}

std::string to_text(const ExperimentConfig& config) {
  std::string out;
  std::string section;
  for (const auto& f : fields()) {
    if (!archived(f)) continue;
    if (f.section != section) {
      out += (section.empty() ? "[" : "\n[") + f.section + "]\n";
      section = f.section;
    }
    out += f.key + " = " + f.get(config) + "\n";
  }
  return out;
}

std::filesystem::path resolve_output(const std::filesystem::path& output) {
  if (output.is_absolute()) return output;
  if (const char* root = std::getenv(kOutputRootEnv); root && *root)
    return std::filesystem::path(root) / output;
  return output;
}

}  // namespace r2ad2::experiment
