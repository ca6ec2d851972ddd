#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dbt/dataset.hpp"
#include "dbt/dbt.hpp"

namespace dbt {

enum class PiwScale : std::uint8_t { logit = 0, probability = 1 };

// Everything a CLI run needs. Parsed from flat `key=value` text; every key
// has a default, and later assignments override earlier ones.
struct RunConfig {
  ModelKind model_kind = ModelKind::dbt;
  DbtConfig model;  // task, schedule, trees, f_phi, seed

  // Data
  std::string data;       // training (or full) CSV
  std::string test_data;  // optional held-out CSV
  std::string response_column;
  char delimiter = ',';
  std::string missing_sentinel = "NA";
  double mcar_rate = 0.0;

  // Splits
  SplitSpec split;
  int folds = 1;

  // Metrics
  int samples = 0;  // 0: 100 for regression, 10 for classification
  std::vector<double> alphas{0.05};
  int qice_bins = 10;
  double piw_lo = 2.5;
  double piw_hi = 97.5;
  PiwScale piw_scale = PiwScale::logit;
  std::vector<int> importance_timesteps{1000, 800, 600, 400, 200, 1};

  // Toy runs
  char toy_task = 'a';
  int toy_rows = 2000;

  int threads = 0;  // 0: all cores
  std::string out_dir = ".";

  int effective_samples() const;
  CsvOptions csv_options() const;

  // Throws InvalidArgument for unknown keys or unparseable values.
  void set(const std::string& key, const std::string& value);
  void merge_text(const std::string& text);
  void merge_file(const std::string& path);
  void validate() const;
  // Canonical `key=value` lines covering every key.
  std::string format() const;
};

std::vector<std::string> run_config_keys();

}  // namespace dbt
