#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "r2ad2/data/dataset.hpp"
#include "r2ad2/error.hpp"
#include "r2ad2/log.hpp"

using namespace r2ad2;
using namespace r2ad2::data;

namespace {
Dataset toy(int normals, int anomalies, const std::vector<std::string>& classes = {"x"}) {
  Dataset d;
  for (int i = 0; i < normals; ++i) d.push_back({{i / double(normals + anomalies), 0.5}, 0, "", ""});
  for (int i = 0; i < anomalies; ++i) {
    const std::string& c = classes[std::size_t(i) % classes.size()];
    d.push_back({{(normals + i) / double(normals + anomalies), 0.9}, 1, c, c});
  }
  return d;
}

std::size_t count_label(const Dataset& d, int label) {
  return static_cast<std::size_t>(std::count_if(d.begin(), d.end(), [&](auto& s) { return s.label == label; }));
}

std::filesystem::path temp_file(const std::string& name, const std::string& content) {
  const auto p = std::filesystem::temp_directory_path() / name;
  std::ofstream(p) << content;
  return p;
}
}  // namespace

TEST_CASE("splits follow the requested fractions") {
  const Dataset d = toy(900, 100);
  const SplitIndices idx = split_indices(labels(d), SplitSpec{});
  CHECK(idx.ae.size() + idx.heldback.size() == 750);
  CHECK(idx.val.size() == 50);
  CHECK(idx.test.size() == 200);
  CHECK(std::abs(double(idx.ae.size()) - 562.5) <= 1);
  CHECK(std::abs(double(idx.heldback.size()) - 187.5) <= 1);

  std::vector<int> seen(d.size(), 0);
  for (const auto* part : {&idx.ae, &idx.heldback, &idx.val, &idx.test})
    for (std::size_t i : *part) ++seen[i];
  CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));

  // stratified: the test split holds 20% of the anomalies within one row
  std::size_t test_anom = 0;
  for (std::size_t i : idx.test) test_anom += d[i].label;
  CHECK(std::abs(double(test_anom) - 20.0) <= 1);
}

TEST_CASE("make_splits separates normals from training anomalies") {
  const Dataset d = toy(900, 100);
  const Splits s = make_splits(d, SplitSpec{});
  CHECK(count_label(s.ae_train_normals, 1) == 0);
  CHECK(count_label(s.heldback_normals, 1) == 0);
  CHECK(count_label(s.train_anomalies, 0) == 0);
  CHECK(s.ae_train_normals.size() + s.heldback_normals.size() + s.train_anomalies.size() == 750);
  CHECK(s.val.size() == 50);
  CHECK(s.test.size() == 200);
}

TEST_CASE("splits are seed deterministic") {
  const Dataset d = toy(300, 40);
  SplitSpec spec;
  spec.seed = 4;
  const Splits a = make_splits(d, spec), b = make_splits(d, spec);
  CHECK(a.test == b.test);
  CHECK(a.ae_train_normals == b.ae_train_normals);
  spec.seed = 5;
  CHECK_FALSE(make_splits(d, spec).test == a.test);
}

TEST_CASE("split validation") {
  SplitSpec bad;
  bad.train_frac = 0.8;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  SplitSpec ae;
  ae.ae_frac_of_train = 1.0;
  CHECK_THROWS_AS(ae.validate(), ConfigError);
  CHECK_THROWS_AS(make_splits(toy(3, 0), SplitSpec{}), UsageError);
}

TEST_CASE("scenario: exact budget, class filter and removal of other anomalies") {
  const Dataset d = toy(3000, 1000, {"A", "B"});
  const Splits s = make_splits(d, SplitSpec{});
  ScenarioSpec sc;
  sc.known_anomaly_budget = 100;
  const ScenarioData out = apply_scenario(s, sc, 1);
  CHECK(out.known_anomalies.size() == 100);
  CHECK(count_label(out.known_anomalies, 1) == 100);
  CHECK(out.ae_train == s.ae_train_normals);
  CHECK(out.heldback_normals == s.heldback_normals);
  const Dataset alarm = out.alarm_train(false);
  CHECK(count_label(alarm, 1) == 100);
  CHECK(alarm.size() == s.heldback_normals.size() + 100);
  CHECK(out.alarm_train(true).size() == alarm.size() + s.ae_train_normals.size());

  ScenarioSpec transfer = sc;
  transfer.train_anomaly_classes = {"A"};
  transfer.test_anomaly_classes = {"A", "B"};
  const ScenarioData t = apply_scenario(s, transfer, 1);
  for (const auto& x : t.known_anomalies) CHECK(x.anomaly_class == "A");
  std::set<std::string> test_classes;
  for (const auto& x : t.test)
    if (x.label == 1) test_classes.insert(x.anomaly_class);
  CHECK(test_classes == std::set<std::string>{"A", "B"});

  ScenarioSpec greedy;
  greedy.known_anomaly_budget = 100000;
  try {
    apply_scenario(s, greedy, 1);
    FAIL("expected a budget error");
  } catch (const UsageError& e) {
    CHECK(std::string(e.what()).find(std::to_string(s.train_anomalies.size())) != std::string::npos);
  }
}

TEST_CASE("scenario: pollution replaces a fraction of normals") {
  const Dataset d = toy(4000, 1200, {"A", "B"});
  const Splits s = make_splits(d, SplitSpec{});
  ScenarioSpec sc;
  sc.pollution_rate = 0.1;
  sc.train_anomaly_classes = {"A"};
  sc.test_anomaly_classes = {"A", "B"};
  const ScenarioData out = apply_scenario(s, sc, 2);
  CHECK(out.ae_train.size() == s.ae_train_normals.size());
  CHECK(out.heldback_normals.size() == s.heldback_normals.size());
  CHECK(count_label(out.ae_train, 1) == 0);
  std::size_t hidden = 0;
  for (const auto& x : out.ae_train) {
    if (x.is_true_anomaly()) {
      ++hidden;
      CHECK(x.true_class == "A");
      CHECK(x.anomaly_class.empty());
    }
  }
  CHECK(hidden == out.polluted_ae);
  CHECK(std::abs(double(hidden) - 0.1 * double(out.ae_train.size())) <= 1);
  CHECK(out.polluted_heldback > 0);

  // no training row carries a test-only class
  for (const auto* part : {&out.ae_train, &out.heldback_normals, &out.known_anomalies})
    for (const auto& x : *part) CHECK(x.true_class != "B");

  // known anomalies and polluting rows are disjoint draws
  std::set<std::vector<double>> known;
  for (const auto& x : out.known_anomalies) known.insert(x.features);
  for (const auto& x : out.ae_train)
    if (x.is_true_anomaly()) CHECK_FALSE(known.contains(x.features));

  ScenarioSpec ae_only = sc;
  ae_only.pollute_heldback = false;
  CHECK(apply_scenario(s, ae_only, 2).polluted_heldback == 0);
  ScenarioSpec clean = sc;
  clean.pollution_rate = 0;
  CHECK(apply_scenario(s, clean, 2).ae_train == s.ae_train_normals);
}

TEST_CASE("scenario validation") {
  ScenarioSpec sc;
  sc.train_anomaly_classes = {"A", "C"};
  sc.test_anomaly_classes = {"A", "B"};
  CHECK_THROWS_AS(sc.validate(), ConfigError);
  ScenarioSpec neg;
  neg.known_anomaly_budget = -1;
  CHECK_THROWS_AS(neg.validate(), ConfigError);

  std::vector<std::string> warnings;
  set_log_sink([&](const std::string& m) { warnings.push_back(m); });
  ScenarioSpec high;
  high.pollution_rate = 0.2;
  high.known_anomaly_budget = 1;
  apply_scenario(make_splits(toy(400, 300), SplitSpec{}), high, 0);
  set_log_sink(nullptr);
  CHECK(warnings.size() == 1);
}

TEST_CASE("fingerprint") {
  Dataset d = toy(20, 5);
  const std::string fp = dataset_fingerprint(d);
  Dataset shuffled = d;
  std::mt19937_64 rng(1);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  CHECK(dataset_fingerprint(shuffled) == fp);
  Dataset flipped = d;
  flipped[3].label = 1;
  flipped[3].anomaly_class = flipped[3].true_class = "x";
  CHECK(dataset_fingerprint(flipped) != fp);
  CHECK(dataset_fingerprint({}) == dataset_fingerprint({}));
  CHECK(dataset_fingerprint({}) != fp);
  CHECK(fp.size() == 16);
}

TEST_CASE("schema parsing") {
  const Schema s = parse_schema(
      "# comment\nlabel = y\npositive = 1, bad\nclass = kind\nnumeric = a, b\n"
      "categorical = proto\nignore = id\n");
  CHECK(s.label_column == "y");
  CHECK(s.positive_values == std::set<std::string>{"1", "bad"});
  CHECK(s.numeric == std::vector<std::string>{"a", "b"});
  CHECK(s.categorical == std::vector<std::string>{"proto"});
  CHECK(s.ignore.contains("id"));
  CHECK_THROWS_AS(parse_schema("numeric = a\n"), ConfigError);
  CHECK_THROWS_AS(parse_schema("label = y\npositive = 1\nnumeric = a\nbogus = 1\n"), ConfigError);
}

TEST_CASE("encoder: min-max from training rows, one-hot, unknown categories") {
  std::istringstream csv(
      "id,a,c,proto,y\n"
      "1,2,5,tcp,0\n"
      "2,10,5,udp,0\n"
      "3,6,5,icmp,0\n"
      "4,6,5,sctp,1\n"
      "5,14,5,tcp,0\n");
  const RawTable t = read_csv(csv);
  const Schema s = parse_schema("label = y\npositive = 1\nnumeric = a, c\ncategorical = proto\nignore = id\n");
  const Encoder e = Encoder::fit(t, s, {0, 1, 2});
  CHECK(e.output_dim() == 5);
  const LabeledSample r2 = e.transform(t, 2);
  CHECK(r2.features[0] == 0.5);             // (6 - 2) / (10 - 2)
  CHECK(r2.features[1] == 0.0);             // zero-range column
  const LabeledSample r1 = e.transform(t, 1);
  // vocabulary sorted: icmp, tcp, udp
  CHECK(std::vector<double>(r1.features.begin() + 2, r1.features.end()) ==
        std::vector<double>{0, 0, 1});
  const LabeledSample r3 = e.transform(t, 3);
  CHECK(std::vector<double>(r3.features.begin() + 2, r3.features.end()) ==
        std::vector<double>{0, 0, 0});
  CHECK(e.unknown_categories() == 1);
  CHECK(r3.label == 1);
  CHECK(r3.anomaly_class == "anomaly");
  CHECK(e.transform(t, 4).features[0] == 1.0);  // clipped above the training max
}

TEST_CASE("csv errors carry line numbers") {
  std::istringstream ragged("a,y\n1,0\n2\n");
  try {
    read_csv(ragged);
    FAIL("expected an error");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  std::istringstream bad("a,y\n1,0\nx,0\n");
  const RawTable t = read_csv(bad);
  const Schema s = parse_schema("label = y\npositive = 1\nnumeric = a\n");
  try {
    Encoder::fit(t, s, {0, 1});
    FAIL("expected an error");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  std::istringstream extra("a,b,y\n1,2,0\n");
  CHECK_THROWS_AS(Encoder::fit(read_csv(extra), s, {0}), ConfigError);
}

TEST_CASE("load_csv fits on training rows only") {
  std::ostringstream csv;
  csv << "v,kind,y\n";
  for (int i = 0; i < 200; ++i) csv << i << ",," << 0 << "\n";
  for (int i = 0; i < 40; ++i) csv << 1000 + i << ",Bot,1\n";
  const auto path = temp_file("r2ad2_load_test.csv", csv.str());
  const Schema s = parse_schema("label = y\npositive = 1\nclass = kind\nnumeric = v\n");
  const LoadedCsv loaded = load_csv(path, s, SplitSpec{});
  CHECK(loaded.feature_dim == 1);
  std::size_t n = loaded.splits.ae_train_normals.size() + loaded.splits.heldback_normals.size() +
                  loaded.splits.train_anomalies.size() + loaded.splits.val.size() +
                  loaded.splits.test.size();
  CHECK(n == 240);
  for (const auto& x : loaded.splits.train_anomalies) CHECK(x.anomaly_class == "Bot");
  // training rows span [0,1] exactly
  double lo = 1, hi = 0;
  for (const auto* part : {&loaded.splits.ae_train_normals, &loaded.splits.heldback_normals,
                           &loaded.splits.train_anomalies})
    for (const auto& x : *part) {
      lo = std::min(lo, x.features[0]);
      hi = std::max(hi, x.features[0]);
    }
  CHECK(lo == 0.0);
  CHECK(hi == 1.0);
  std::filesystem::remove(path);
}

TEST_CASE("processed samples round-trip through CSV") {
  const Dataset d = make_synthetic({"blobs-2class", 30, 10, 4, 3});
  const auto path = std::filesystem::temp_directory_path() / "r2ad2_samples.csv";
  write_samples_csv(d, path);
  CHECK(read_samples_csv(path) == d);
  std::filesystem::remove(path);
}

TEST_CASE("synthetic datasets") {
  for (const auto& name : synthetic_names()) {
    SyntheticSpec spec;
    spec.name = name;
    spec.n_normals = 500;
    spec.n_anomalies = 200;
    const Dataset d = make_synthetic(spec);
    CHECK(d.size() == 700);
    CHECK(count_label(d, 1) == 200);
    CHECK_NOTHROW(validate(d));
    for (const auto& s : d)
      for (double v : s.features) CHECK((v >= 0.0 && v <= 1.0));
    CHECK(dataset_fingerprint(make_synthetic(spec)) == dataset_fingerprint(d));
  }
  SyntheticSpec two;
  two.name = "blobs-2class";
  std::set<std::string> classes;
  for (const auto& s : make_synthetic(two))
    if (s.label) classes.insert(s.anomaly_class);
  CHECK(classes == std::set<std::string>{"A", "B"});
  SyntheticSpec unknown;
  unknown.name = "moons";
  CHECK_THROWS_AS(make_synthetic(unknown), ConfigError);
}

TEST_CASE("blobs benchmark sizes: 500 test anomalies") {
  const Dataset d = make_synthetic(SyntheticSpec{});
  const Splits s = make_splits(d, SplitSpec{});
  CHECK(count_label(s.test, 1) == 500);
  CHECK(count_label(s.test, 0) == 1000);
}
