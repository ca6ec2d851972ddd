#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dbt/config.hpp"
#include "dbt/dbt.hpp"
#include "dbt/metrics.hpp"

namespace dbt {

// Evaluation of one model on one labeled test set.
struct EvalResult {
  TaskKind task = TaskKind::regression;
  std::size_t rows = 0;
  int samples = 0;
  // Regression
  double rmse = 0.0;
  double nll = 0.0;
  double qice = 0.0;
  // Classification
  double accuracy = 0.0;
  std::optional<DeferralReport> deferral;
};

EvalResult evaluate(const DiffusionModel& model, const Dataset& test, const RunConfig& cfg);
EvalResult evaluate_samples(const DiffusionModel& model, const Dataset& test,
                            const SampleMatrix& samples, const RunConfig& cfg);

// Metric name/value pairs in report order.
std::vector<std::pair<std::string, double>> metric_values(const EvalResult& r);

DiffusionModel train_model(const Dataset& train, const RunConfig& cfg,
                           TrainReport* report = nullptr, std::ostream* log = nullptr);

// Loads cfg.data with the configured CSV options; applies cfg.mcar_rate.
Dataset load_training_data(const RunConfig& cfg);
// Loads rows for a trained model, typed by the model schema.
Dataset load_rows_for(const DiffusionModel& model, const std::string& path,
                      const RunConfig& cfg, bool has_response);

std::string default_model_path(const RunConfig& cfg);

// Each command writes its data products under cfg.out_dir (or to `out` where
// noted) and logs to `log`. They return the process exit code's success
// value; failures throw.
void cmd_train(const RunConfig& cfg, const std::string& model_path, std::ostream& log);
// Long-format CSV: row,sample,value (+ probability for classification).
void cmd_sample(const RunConfig& cfg, const std::string& model_path,
                const std::string& data_path, std::ostream& out, std::ostream& log);
void write_samples_csv(const DiffusionModel& model, const SampleMatrix& samples,
                       std::ostream& out);
EvalResult cmd_eval(const RunConfig& cfg, const std::string& model_path,
                    const std::string& data_path, std::ostream& out, std::ostream& log);

struct FoldSummary {
  std::vector<EvalResult> folds;
  std::vector<std::pair<std::string, Summary>> metrics;
};
// Trains and evaluates on cfg.folds splits of cfg.data.
FoldSummary cmd_eval_folds(const RunConfig& cfg, std::ostream& out, std::ostream& log);

struct ImportanceRow {
  int t = 0;
  int rank = 0;
  int feature = 0;
  std::string name;
  double gain = 0.0;
};
std::vector<ImportanceRow> feature_importance(const DiffusionModel& model,
                                             const std::vector<int>& timesteps);
void cmd_importance(const RunConfig& cfg, const std::string& model_path, std::ostream& out,
                    std::ostream& log);

// CSV with header t,gamma0,gamma1,gamma2,tilde_beta, rows t = T..2.
void cmd_schedule(int timesteps, double beta_start, double beta_end, std::ostream& out);

// Generates a toy task, trains on 90% of it, samples the rest and writes
// toy_data.csv, toy_samples.csv and toy_metrics.csv under cfg.out_dir.
EvalResult cmd_toy(const RunConfig& cfg, std::ostream& log);

}  // namespace dbt
