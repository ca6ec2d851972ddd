#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dbt/tree.hpp"

namespace dbt {

enum class TaskKind : std::uint8_t { regression = 0, classification = 1 };

std::string to_string(TaskKind task);
TaskKind task_kind_from_string(const std::string& name);

struct ColumnSpec {
  std::string name;
  FeatureKind kind = FeatureKind::numeric;
  // Categorical dictionary in order of first appearance; code = position.
  std::vector<std::string> categories;

  int code_of(const std::string& category) const;  // -1 if unseen

  friend bool operator==(const ColumnSpec&, const ColumnSpec&) = default;
};

struct Schema {
  std::vector<ColumnSpec> columns;
  std::string response_name = "y";

  friend bool operator==(const Schema&, const Schema&) = default;
};

// Typed tabular data. Missing cells are kMissing; categorical cells hold the
// dictionary code, with -1 for categories outside the dictionary.
struct Dataset {
  std::string name;
  Schema schema;
  Eigen::MatrixXd cells;     // rows x features
  Eigen::VectorXd response;  // empty when unlabeled

  Eigen::Index rows() const { return cells.rows(); }
  Eigen::Index features() const { return cells.cols(); }
  bool labeled() const { return response.size() == cells.rows(); }
  bool missing(Eigen::Index row, Eigen::Index col) const {
    return is_missing(cells(row, col));
  }
  std::vector<FeatureKind> kinds() const;

  Dataset select_rows(const std::vector<Eigen::Index>& rows) const;
  // Checks rectangular shape, dictionary codes, finiteness.
  void validate() const;

  friend bool operator==(const Dataset& a, const Dataset& b);
};

struct CsvOptions {
  char delimiter = ',';
  std::string missing_sentinel = "NA";
  // Response column name; empty means the last column.
  std::string response_column;
  // False for feature-only files (e.g. rows to sample at).
  bool has_response = true;
  TaskKind task = TaskKind::regression;
};

// Reads an RFC-4180 style CSV with a header row. A column is numeric when
// every non-missing cell parses as a number, otherwise categorical. When
// `schema` is given, column kinds and dictionaries come from it and the
// header must match its column names.
Dataset load_csv(const std::string& path, const CsvOptions& options = {},
                 const Schema* schema = nullptr);
Dataset parse_csv(const std::string& text, const CsvOptions& options = {},
                  const Schema* schema = nullptr, const std::string& name = "");
void write_csv(const Dataset& data, const std::string& path,
               const CsvOptions& options = {});
std::string format_csv(const Dataset& data, const CsvOptions& options = {});

// Plain `key=value` sidecar describing column kinds and dictionaries.
void write_schema(const Schema& schema, const std::string& path);
Schema read_schema(const std::string& path);
std::string format_schema(const Schema& schema);
Schema parse_schema(const std::string& text);

struct SplitSpec {
  double train_fraction = 0.9;
  std::uint64_t fold_seed = 0;
  std::uint64_t fold_index = 0;
};

struct Split {
  Dataset train;
  Dataset test;
  std::vector<Eigen::Index> train_rows;
  std::vector<Eigen::Index> test_rows;
};

// Deterministic shuffle keyed on (fold_seed, fold_index); the first
// floor(train_fraction * n) shuffled rows form the training split.
Split make_split(const Dataset& data, const SplitSpec& spec);

struct AffineTransform {
  double mean = 0.0;
  double scale = 1.0;

  double apply(double v) const { return (v - mean) / scale; }
  double invert(double v) const { return v * scale + mean; }
  friend bool operator==(const AffineTransform&, const AffineTransform&) = default;
};

struct Standardization {
  std::vector<std::optional<AffineTransform>> features;  // numeric only
  std::optional<AffineTransform> response;              // regression only

  Dataset apply(const Dataset& data) const;
  Eigen::VectorXd invert_response(const Eigen::VectorXd& v) const;
};

inline constexpr double kStdFloor = 1e-8;

// Fits on `train` only. Numeric features always; the response only for
// regression.
Standardization fit_standardization(const Dataset& train, TaskKind task);

struct StandardizedSplit {
  Dataset train;
  Dataset test;
  Standardization transform;
};
StandardizedSplit standardize(const Dataset& train, const Dataset& test,
                              TaskKind task);

// Each feature cell independently becomes missing with probability `rate`.
Dataset mcar_mask(const Dataset& data, double rate, std::uint64_t seed);

// Feature matrix in training layout (one column per dataset feature).
FeatureMatrix to_feature_matrix(const Dataset& data);

}  // namespace dbt
