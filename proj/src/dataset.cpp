#include "dbt/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "dbt/errors.hpp"
#include "dbt/random.hpp"

namespace dbt {

std::string to_string(TaskKind task) {
  return task == TaskKind::regression ? "regression" : "classification";
}

TaskKind task_kind_from_string(const std::string& name) {
  if (name == "regression") return TaskKind::regression;
  if (name == "classification" || name == "binary-classification")
    return TaskKind::classification;
  throw InvalidArgument("unknown task kind '" + name + "'");
}

int ColumnSpec::code_of(const std::string& category) const {
  const auto it = std::find(categories.begin(), categories.end(), category);
  return it == categories.end() ? -1
                                : static_cast<int>(it - categories.begin());
}

std::vector<FeatureKind> Dataset::kinds() const {
  std::vector<FeatureKind> out;
  out.reserve(schema.columns.size());
  for (const auto& c : schema.columns) out.push_back(c.kind);
  return out;
}

Dataset Dataset::select_rows(const std::vector<Eigen::Index>& rows) const {
  Dataset out;
  out.name = name;
  out.schema = schema;
  out.cells.resize(static_cast<Eigen::Index>(rows.size()), cells.cols());
  if (labeled()) out.response.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.cells.row(static_cast<Eigen::Index>(i)) = cells.row(rows[i]);
    if (labeled()) out.response(static_cast<Eigen::Index>(i)) = response(rows[i]);
  }
  return out;
}

void Dataset::validate() const {
  if (static_cast<Eigen::Index>(schema.columns.size()) != cells.cols())
    throw DataError("dataset schema has " +
                    std::to_string(schema.columns.size()) + " columns, cells have " +
                    std::to_string(cells.cols()));
  if (response.size() != 0 && response.size() != cells.rows())
    throw DataError("response length does not match row count");
  for (Eigen::Index c = 0; c < cells.cols(); ++c) {
    const auto& spec = schema.columns[c];
    for (Eigen::Index r = 0; r < cells.rows(); ++r) {
      const double v = cells(r, c);
      if (is_missing(v)) continue;
      if (spec.kind == FeatureKind::numeric) {
        if (!std::isfinite(v))
          throw DataError("non-finite value in column '" + spec.name + "'");
      } else if (v != std::floor(v) || v < -1 ||
                 v >= static_cast<double>(spec.categories.size())) {
        throw DataError("invalid category code in column '" + spec.name + "'");
      }
    }
  }
  if (response.size() && !response.allFinite())
    throw DataError("response holds non-finite values");
}

bool operator==(const Dataset& a, const Dataset& b) {
  if (!(a.schema == b.schema) || a.cells.rows() != b.cells.rows() ||
      a.cells.cols() != b.cells.cols() || a.response.size() != b.response.size())
    return false;
  for (Eigen::Index i = 0; i < a.cells.size(); ++i) {
    const double x = a.cells.data()[i], y = b.cells.data()[i];
    if (is_missing(x) != is_missing(y)) return false;
    if (!is_missing(x) && x != y) return false;
  }
  return a.response == b.response;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::vector<std::vector<std::string>> split_records(const std::string& text,
                                                    char delim) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    if (!(record.size() == 1 && record[0].empty())) records.push_back(std::move(record));
    record.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (in_quotes) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(ch);
      }
      continue;
    }
    if (ch == '"' && !field_started) {
      in_quotes = true;
      field_started = true;
    } else if (ch == delim) {
      end_field();
    } else if (ch == '\n') {
      end_record();
    } else if (ch == '\r') {
      if (i + 1 < text.size() && text[i + 1] == '\n') continue;
      end_record();
    } else {
      field.push_back(ch);
      field_started = true;
    }
  }
  if (in_quotes) throw DataError("unterminated quoted field in CSV");
  if (field_started || !field.empty() || !record.empty()) end_record();
  return records;
}

std::optional<double> parse_number(const std::string& raw) {
  std::size_t b = 0, e = raw.size();
  while (b < e && std::isspace(static_cast<unsigned char>(raw[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(raw[e - 1]))) --e;
  if (b == e) return std::nullopt;
  if (raw[b] == '+') ++b;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(raw.data() + b, raw.data() + e, v);
  if (ec != std::errc() || ptr != raw.data() + e || !std::isfinite(v))
    return std::nullopt;
  return v;
}

bool is_missing_token(const std::string& s, const std::string& sentinel) {
  return s.empty() || s == sentinel;
}

std::string quote(const std::string& s, char delim) {
  const bool needs = s.find_first_of(std::string("\"\r\n") + delim) !=
                         std::string::npos ||
                     (!s.empty() && (std::isspace(static_cast<unsigned char>(s.front())) ||
                                     std::isspace(static_cast<unsigned char>(s.back()))));
  if (!needs) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

Dataset parse_csv(const std::string& text, const CsvOptions& options,
                  const Schema* schema, const std::string& name) {
  auto records = split_records(text, options.delimiter);
  if (records.empty()) throw DataError("CSV input is empty");
  const std::vector<std::string> header = records.front();
  const std::size_t width = header.size();
  for (std::size_t r = 1; r < records.size(); ++r)
    if (records[r].size() != width)
      throw DataError("ragged CSV: row " + std::to_string(r) + " has " +
                      std::to_string(records[r].size()) + " fields, header has " +
                      std::to_string(width));
  const std::size_t n_rows = records.size() - 1;

  std::size_t response_col = width;
  if (options.has_response) {
    if (options.response_column.empty()) {
      if (width < 1) throw DataError("CSV has no columns");
      response_col = width - 1;
    } else {
      const auto it = std::find(header.begin(), header.end(), options.response_column);
      if (it == header.end())
        throw DataError("response column '" + options.response_column +
                        "' not found in header");
      response_col = static_cast<std::size_t>(it - header.begin());
    }
  }
  std::vector<std::size_t> feature_cols;
  for (std::size_t c = 0; c < width; ++c)
    if (c != response_col) feature_cols.push_back(c);

  Dataset data;
  data.name = name;
  data.schema.response_name =
      response_col < width ? header[response_col]
                           : (schema ? schema->response_name : std::string("y"));
  if (schema) {
    if (schema->columns.size() != feature_cols.size())
      throw DataError("CSV has " + std::to_string(feature_cols.size()) +
                      " feature columns, schema expects " +
                      std::to_string(schema->columns.size()));
    for (std::size_t j = 0; j < feature_cols.size(); ++j)
      if (header[feature_cols[j]] != schema->columns[j].name)
        throw DataError("column " + std::to_string(j) + " is '" +
                        header[feature_cols[j]] + "', schema expects '" +
                        schema->columns[j].name + "'");
    data.schema.columns = schema->columns;
  } else {
    for (std::size_t c : feature_cols) {
      ColumnSpec spec;
      spec.name = header[c];
      bool numeric = true;
      for (std::size_t r = 1; r <= n_rows && numeric; ++r) {
        const std::string& cell = records[r][c];
        if (!is_missing_token(cell, options.missing_sentinel) && !parse_number(cell))
          numeric = false;
      }
      spec.kind = numeric ? FeatureKind::numeric : FeatureKind::categorical;
      if (!numeric) {
        std::map<std::string, int> seen;
        for (std::size_t r = 1; r <= n_rows; ++r) {
          const std::string& cell = records[r][c];
          if (is_missing_token(cell, options.missing_sentinel)) continue;
          if (seen.emplace(cell, static_cast<int>(spec.categories.size())).second)
            spec.categories.push_back(cell);
        }
      }
      data.schema.columns.push_back(std::move(spec));
    }
  }

  data.cells.resize(static_cast<Eigen::Index>(n_rows),
                    static_cast<Eigen::Index>(feature_cols.size()));
  for (std::size_t j = 0; j < feature_cols.size(); ++j) {
    const ColumnSpec& spec = data.schema.columns[j];
    std::map<std::string, int> lookup;
    for (std::size_t k = 0; k < spec.categories.size(); ++k)
      lookup.emplace(spec.categories[k], static_cast<int>(k));
    for (std::size_t r = 0; r < n_rows; ++r) {
      const std::string& cell = records[r + 1][feature_cols[j]];
      double v = kMissing;
      if (!is_missing_token(cell, options.missing_sentinel)) {
        if (spec.kind == FeatureKind::numeric) {
          const auto parsed = parse_number(cell);
          if (!parsed)
            throw DataError("row " + std::to_string(r + 1) + ", column '" +
                            spec.name + "': '" + cell + "' is not numeric");
          v = *parsed;
        } else {
          const auto it = lookup.find(cell);
          v = it == lookup.end() ? -1.0 : static_cast<double>(it->second);
        }
      }
      data.cells(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = v;
    }
  }

  if (response_col < width) {
    data.response.resize(static_cast<Eigen::Index>(n_rows));
    for (std::size_t r = 0; r < n_rows; ++r) {
      const std::string& cell = records[r + 1][response_col];
      const auto parsed = parse_number(cell);
      if (!parsed)
        throw DataError("row " + std::to_string(r + 1) + ": response '" + cell +
                        "' is not numeric");
      if (options.task == TaskKind::classification && *parsed != 0.0 &&
          *parsed != 1.0)
        throw DataError("row " + std::to_string(r + 1) + ": label '" + cell +
                        "' is not 0 or 1");
      data.response(static_cast<Eigen::Index>(r)) = *parsed;
    }
  }
  return data;
}

Dataset load_csv(const std::string& path, const CsvOptions& options,
                 const Schema* schema) {
  std::string name = path;
  if (const auto slash = name.find_last_of('/'); slash != std::string::npos)
    name = name.substr(slash + 1);
  return parse_csv(read_file(path), options, schema, name);
}

std::string format_csv(const Dataset& data, const CsvOptions& options) {
  const char d = options.delimiter;
  std::string out;
  for (std::size_t j = 0; j < data.schema.columns.size(); ++j) {
    if (j) out.push_back(d);
    out += quote(data.schema.columns[j].name, d);
  }
  if (data.labeled()) {
    if (!data.schema.columns.empty()) out.push_back(d);
    out += quote(data.schema.response_name, d);
  }
  out.push_back('\n');
  for (Eigen::Index r = 0; r < data.rows(); ++r) {
    for (Eigen::Index j = 0; j < data.features(); ++j) {
      if (j) out.push_back(d);
      const double v = data.cells(r, j);
      const ColumnSpec& spec = data.schema.columns[j];
      if (is_missing(v) || (spec.kind == FeatureKind::categorical && v < 0))
        out += quote(options.missing_sentinel, d);
      else if (spec.kind == FeatureKind::numeric)
        out += format_double(v);
      else
        out += quote(spec.categories[static_cast<std::size_t>(v)], d);
    }
    if (data.labeled()) {
      if (data.features()) out.push_back(d);
      out += format_double(data.response(r));
    }
    out.push_back('\n');
  }
  return out;
}

void write_csv(const Dataset& data, const std::string& path,
               const CsvOptions& options) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << format_csv(data, options);
}

// ---------------------------------------------------------------------------
// Schema sidecar

std::string format_schema(const Schema& schema) {
  std::ostringstream out;
  out << "response=" << schema.response_name << '\n';
  out << "columns=" << schema.columns.size() << '\n';
  for (std::size_t j = 0; j < schema.columns.size(); ++j) {
    const auto& c = schema.columns[j];
    out << "column." << j << ".name=" << c.name << '\n';
    out << "column." << j << ".kind="
        << (c.kind == FeatureKind::numeric ? "numeric" : "categorical") << '\n';
    for (std::size_t k = 0; k < c.categories.size(); ++k)
      out << "column." << j << ".category." << k << '=' << c.categories[k] << '\n';
  }
  return out.str();
}

Schema parse_schema(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError("schema line without '=': " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto get = [&](const std::string& key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) throw DataError("schema is missing key '" + key + "'");
    return it->second;
  };
  Schema schema;
  schema.response_name = get("response");
  const auto n = parse_number(get("columns"));
  if (!n || *n < 0) throw DataError("schema column count is invalid");
  for (int j = 0; j < static_cast<int>(*n); ++j) {
    const std::string prefix = "column." + std::to_string(j) + ".";
    ColumnSpec c;
    c.name = get(prefix + "name");
    const std::string& kind = get(prefix + "kind");
    if (kind == "numeric") {
      c.kind = FeatureKind::numeric;
    } else if (kind == "categorical") {
      c.kind = FeatureKind::categorical;
      for (int k = 0;; ++k) {
        const auto it = kv.find(prefix + "category." + std::to_string(k));
        if (it == kv.end()) break;
        c.categories.push_back(it->second);
      }
    } else {
      throw DataError("schema column kind '" + kind + "' is unknown");
    }
    schema.columns.push_back(std::move(c));
  }
  return schema;
}

void write_schema(const Schema& schema, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << format_schema(schema);
}

Schema read_schema(const std::string& path) { return parse_schema(read_file(path)); }

// ---------------------------------------------------------------------------
// Splits, standardization, masking

Split make_split(const Dataset& data, const SplitSpec& spec) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
    throw InvalidArgument("train_fraction must lie in (0, 1)");
  const Eigen::Index n = data.rows();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng rng = make_rng(spec.fold_seed, spec.fold_index, 0x5b1e);
  // Fisher-Yates with a 64-bit modulo draw; bias is below 2^-40 for any
  // realistic row count.
  for (std::size_t i = order.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  const auto n_train = static_cast<std::size_t>(
      std::floor(spec.train_fraction * static_cast<double>(n)));
  Split out;
  out.train_rows.assign(order.begin(), order.begin() + n_train);
  out.test_rows.assign(order.begin() + n_train, order.end());
  out.train = data.select_rows(out.train_rows);
  out.test = data.select_rows(out.test_rows);
  return out;
}

namespace {

AffineTransform fit_affine(const Eigen::VectorXd& v) {
  double sum = 0.0;
  Eigen::Index n = 0;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (!is_missing(v(i))) {
      sum += v(i);
      ++n;
    }
  if (n == 0) return {};
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (!is_missing(v(i))) ss += (v(i) - mean) * (v(i) - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n));
  return {mean, std::max(sd, kStdFloor)};
}

}  // namespace

Standardization fit_standardization(const Dataset& train, TaskKind task) {
  Standardization s;
  s.features.resize(static_cast<std::size_t>(train.features()));
  for (Eigen::Index j = 0; j < train.features(); ++j)
    if (train.schema.columns[j].kind == FeatureKind::numeric)
      s.features[j] = fit_affine(train.cells.col(j));
  if (task == TaskKind::regression && train.labeled())
    s.response = fit_affine(train.response);
  return s;
}

Dataset Standardization::apply(const Dataset& data) const {
  if (static_cast<Eigen::Index>(features.size()) != data.features())
    throw DataError("standardization fitted on a different column count");
  Dataset out = data;
  for (Eigen::Index j = 0; j < out.features(); ++j) {
    if (!features[j]) continue;
    for (Eigen::Index r = 0; r < out.rows(); ++r)
      if (!is_missing(out.cells(r, j))) out.cells(r, j) = features[j]->apply(out.cells(r, j));
  }
  if (response && out.labeled())
    out.response = out.response.unaryExpr([&](double v) { return response->apply(v); });
  return out;
}

Eigen::VectorXd Standardization::invert_response(const Eigen::VectorXd& v) const {
  if (!response) return v;
  return v.unaryExpr([&](double x) { return response->invert(x); });
}

StandardizedSplit standardize(const Dataset& train, const Dataset& test,
                              TaskKind task) {
  Standardization s = fit_standardization(train, task);
  return {s.apply(train), s.apply(test), s};
}

Dataset mcar_mask(const Dataset& data, double rate, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate < 1.0))
    throw InvalidArgument("MCAR rate must lie in [0, 1)");
  Dataset out = data;
  if (rate == 0.0) return out;
  Rng rng = make_rng(seed, 0x3ca7);
  std::bernoulli_distribution drop(rate);
  for (Eigen::Index r = 0; r < out.rows(); ++r)
    for (Eigen::Index j = 0; j < out.features(); ++j)
      if (drop(rng)) out.cells(r, j) = kMissing;
  return out;
}

FeatureMatrix to_feature_matrix(const Dataset& data) {
  return FeatureMatrix(data.cells, data.kinds());
}

}  // namespace dbt
