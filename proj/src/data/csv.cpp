#include <boost/algorithm/string.hpp>
#include <boost/tokenizer.hpp>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "r2ad2/data/dataset.hpp"
#include "r2ad2/error.hpp"
#include "r2ad2/log.hpp"

namespace r2ad2::data {

namespace {
constexpr const char* kDefaultClass = "anomaly";

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  boost::split(out, v, boost::is_any_of(","));
  for (auto& s : out) boost::trim(s);
  std::erase(out, std::string{});
  return out;
}

std::vector<std::string> split_csv_line(const std::string& line, std::size_t line_no) {
  using Tok = boost::tokenizer<boost::escaped_list_separator<char>>;
  try {
    Tok tok(line, boost::escaped_list_separator<char>('\\', ',', '"'));
    std::vector<std::string> out;
    for (auto& f : tok) out.push_back(boost::trim_copy(f));
    return out;
  } catch (const boost::escaped_list_error& e) {
    throw IoError("line " + std::to_string(line_no) + ": " + e.what());
  }
}

double parse_double(const std::string& s, std::size_t line_no, const std::string& column) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v))
    throw IoError("line " + std::to_string(line_no) + ": column '" + column +
                  "' is not a finite number: '" + s + "'");
  return v;
}

std::size_t column_index(const std::vector<std::string>& header, const std::string& name) {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw ConfigError("schema column '" + name + "' not in CSV header");
  return static_cast<std::size_t>(it - header.begin());
}
}  // namespace

Schema parse_schema(const std::string& text) {
  Schema s;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    boost::trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("schema line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = boost::trim_copy(line.substr(0, eq));
    const std::string value = boost::trim_copy(line.substr(eq + 1));
    if (key == "label") s.label_column = value;
    else if (key == "positive") for (auto& v : split_list(value)) s.positive_values.insert(v);
    else if (key == "class") s.class_column = value;
    else if (key == "numeric") s.numeric = split_list(value);
    else if (key == "categorical") s.categorical = split_list(value);
    else if (key == "ignore") for (auto& v : split_list(value)) s.ignore.insert(v);
    else throw ConfigError("schema line " + std::to_string(line_no) + ": unknown key '" + key + "'");
  }
  if (s.label_column.empty()) throw ConfigError("schema needs a label column");
  if (s.positive_values.empty()) throw ConfigError("schema needs positive label values");
  if (s.numeric.empty() && s.categorical.empty()) throw ConfigError("schema declares no features");
  return s;
}

Schema load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read schema " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_schema(ss.str());
}

RawTable read_csv(std::istream& in) {
  RawTable t;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (boost::trim_copy(line).empty()) continue;
    auto fields = split_csv_line(line, line_no);
    if (t.header.empty()) {
      t.header = std::move(fields);
      continue;
    }
    if (fields.size() != t.header.size())
      throw IoError("line " + std::to_string(line_no) + ": expected " +
                    std::to_string(t.header.size()) + " fields, found " +
                    std::to_string(fields.size()));
    t.rows.push_back(std::move(fields));
    t.line_numbers.push_back(line_no);
  }
  if (t.header.empty()) throw IoError("CSV has no header row");
  return t;
}

RawTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  return read_csv(in);
}

Encoder Encoder::fit(const RawTable& table, const Schema& schema,
                     const std::vector<std::size_t>& train_rows) {
  Encoder e;
  e.label_col_ = column_index(table.header, schema.label_column);
  if (!schema.class_column.empty()) e.class_col_ = column_index(table.header, schema.class_column);
  e.positive_ = schema.positive_values;

  std::set<std::string> declared{schema.label_column};
  if (!schema.class_column.empty()) declared.insert(schema.class_column);
  declared.insert(schema.ignore.begin(), schema.ignore.end());
  declared.insert(schema.numeric.begin(), schema.numeric.end());
  declared.insert(schema.categorical.begin(), schema.categorical.end());
  for (const auto& h : table.header)
    if (!declared.contains(h)) throw ConfigError("CSV column '" + h + "' is not in the schema");

  for (const auto& name : schema.numeric) {
    Numeric n{column_index(table.header, name), INFINITY, -INFINITY};
    for (std::size_t r : train_rows) {
      const double v = parse_double(table.rows[r][n.col], table.line_numbers[r], name);
      n.lo = std::min(n.lo, v);
      n.hi = std::max(n.hi, v);
    }
    e.numeric_.push_back(n);
  }
  for (const auto& name : schema.categorical) {
    Categorical c{column_index(table.header, name), {}};
    std::set<std::string> vocab;
    for (std::size_t r : train_rows) vocab.insert(table.rows[r][c.col]);
    int code = 0;
    for (const auto& v : vocab) c.codes[v] = code++;
    e.categorical_.push_back(std::move(c));
  }
  return e;
}

int Encoder::output_dim() const {
  int d = static_cast<int>(numeric_.size());
  for (const auto& c : categorical_) d += static_cast<int>(c.codes.size());
  return d;
}

LabeledSample Encoder::transform(const RawTable& table, std::size_t row) const {
  const auto& fields = table.rows[row];
  const std::size_t line = table.line_numbers[row];
  LabeledSample s;
  s.features.reserve(static_cast<std::size_t>(output_dim()));
  for (const auto& n : numeric_) {
    const double v = parse_double(fields[n.col], line, table.header[n.col]);
    const double range = n.hi - n.lo;
    // zero-range columns map to 0; test values outside the training range are clipped
    s.features.push_back(range > 0 ? std::clamp((v - n.lo) / range, 0.0, 1.0) : 0.0);
  }
  for (const auto& c : categorical_) {
    const std::size_t base = s.features.size();
    s.features.resize(base + c.codes.size(), 0.0);
    const auto it = c.codes.find(fields[c.col]);
    if (it != c.codes.end()) s.features[base + static_cast<std::size_t>(it->second)] = 1.0;
    else ++unknown_;
  }
  s.label = positive_.contains(fields[label_col_]) ? 1 : 0;
  if (s.label == 1) {
    s.anomaly_class = class_col_ && !fields[*class_col_].empty() ? fields[*class_col_] : kDefaultClass;
    s.true_class = s.anomaly_class;
  }
  return s;
}

LoadedCsv load_csv(const std::filesystem::path& path, const Schema& schema,
                   const SplitSpec& spec) {
  const RawTable table = read_csv(path);
  const std::size_t label_col = column_index(table.header, schema.label_column);
  std::vector<int> y;
  y.reserve(table.rows.size());
  for (const auto& r : table.rows) y.push_back(schema.positive_values.contains(r[label_col]) ? 1 : 0);

  const SplitIndices idx = split_indices(y, spec);
  std::vector<std::size_t> train = idx.ae;
  train.insert(train.end(), idx.heldback.begin(), idx.heldback.end());
  const Encoder enc = Encoder::fit(table, schema, train);

  LoadedCsv out;
  out.feature_dim = enc.output_dim();
  auto take = [&](const std::vector<std::size_t>& rows, Dataset* normals, Dataset* anomalies) {
    for (std::size_t r : rows) {
      LabeledSample s = enc.transform(table, r);
      (s.label == 0 ? normals : anomalies)->push_back(std::move(s));
    }
  };
  take(idx.ae, &out.splits.ae_train_normals, &out.splits.train_anomalies);
  take(idx.heldback, &out.splits.heldback_normals, &out.splits.train_anomalies);
  take(idx.val, &out.splits.val, &out.splits.val);
  take(idx.test, &out.splits.test, &out.splits.test);
  out.unknown_categories = enc.unknown_categories();
  if (out.unknown_categories > 0)
    log_warn(std::to_string(out.unknown_categories) +
             " categorical values unseen in training were encoded as all-zero");
  return out;
}

void write_samples_csv(const Dataset& d, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  const std::size_t dim = d.empty() ? 0 : d.front().features.size();
  for (std::size_t j = 0; j < dim; ++j) out << 'f' << j << ',';
  out << "label,anomaly_class,true_class\n";
  out << std::setprecision(17);
  for (const auto& s : d) {
    for (double v : s.features) out << v << ',';
    out << s.label << ',' << s.anomaly_class << ',' << s.true_class << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

Dataset read_samples_csv(const std::filesystem::path& path) {
  const RawTable t = read_csv(path);
  if (t.header.size() < 3) throw IoError("processed CSV needs label/class columns");
  const std::size_t dim = t.header.size() - 3;
  Dataset d;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    LabeledSample s;
    for (std::size_t j = 0; j < dim; ++j)
      s.features.push_back(parse_double(t.rows[r][j], t.line_numbers[r], t.header[j]));
    s.label = static_cast<int>(parse_double(t.rows[r][dim], t.line_numbers[r], "label"));
    s.anomaly_class = t.rows[r][dim + 1];
    s.true_class = t.rows[r][dim + 2];
    d.push_back(std::move(s));
  }
  validate(d);
  return d;
}

}  // namespace r2ad2::data
