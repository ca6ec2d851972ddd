#include "dbt/commands.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "dbt/card_t.hpp"
#include "dbt/errors.hpp"
#include "dbt/generators.hpp"
#include "dbt/model_io.hpp"
#include "dbt/parallel.hpp"

namespace dbt {

namespace {

constexpr std::uint64_t kMcarStream = 0x3c4a;
constexpr std::uint64_t kFoldStream = 0xf01d;
constexpr std::uint64_t kToyStream = 0x70e;

std::string out_path(const RunConfig& cfg, const std::string& file) {
  std::filesystem::create_directories(cfg.out_dir);
  return (std::filesystem::path(cfg.out_dir) / file).string();
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  return out;
}

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

void echo_config(const RunConfig& cfg, std::ostream& log) {
  log << "# effective config\n" << cfg.format() << "# end config\n";
}

std::string read_header_line(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::string line;
  std::getline(in, line);
  return line;
}

}  // namespace

std::string default_model_path(const RunConfig& cfg) {
  return (std::filesystem::path(cfg.out_dir) / "model.dbt").string();
}

Dataset load_training_data(const RunConfig& cfg) {
  if (cfg.data.empty()) throw InvalidArgument("no training data given (set data=... or --data)");
  Dataset data = load_csv(cfg.data, cfg.csv_options());
  if (cfg.mcar_rate > 0.0)
    data = mcar_mask(data, cfg.mcar_rate, derive_seed(cfg.model.seed, kMcarStream));
  return data;
}

Dataset load_rows_for(const DiffusionModel& model, const std::string& path,
                      const RunConfig& cfg, bool has_response) {
  CsvOptions options = cfg.csv_options();
  options.task = model.config.task;
  if (has_response) {
    options.response_column = model.schema.response_name;
  } else {
    // Feature-only files are accepted; a response column, if present, is read.
    CsvOptions probe = options;
    probe.has_response = false;
    const Dataset header = parse_csv(read_header_line(path) + "\n", probe);
    const bool present =
        std::any_of(header.schema.columns.begin(), header.schema.columns.end(),
                    [&](const ColumnSpec& c) { return c.name == model.schema.response_name; });
    options.has_response = present;
    if (present) options.response_column = model.schema.response_name;
  }
  Dataset rows = load_csv(path, options, &model.schema);
  if (cfg.mcar_rate > 0.0)
    rows = mcar_mask(rows, cfg.mcar_rate, derive_seed(cfg.model.seed, kMcarStream, 1));
  return rows;
}

DiffusionModel train_model(const Dataset& train, const RunConfig& cfg, TrainReport* report,
                           std::ostream* log) {
  DbtConfig mc = cfg.model;
  TrainHooks hooks;
  const auto start = std::chrono::steady_clock::now();
  if (log)
    hooks.progress = [&, T = mc.timesteps](int t, double mse) {
      if (t == T || t == 1 || t % 100 == 0) {
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        *log << "  t=" << t << " mse=" << fmt(mse) << " elapsed=" << std::fixed
             << std::setprecision(1) << secs << "s" << std::defaultfloat << '\n';
      }
    };
  if (log)
    *log << "training " << to_string(cfg.model_kind) << " on " << train.rows() << " rows x "
         << train.features() << " features, T=" << mc.timesteps << ", n_noise=" << mc.n_noise
         << '\n';
  return cfg.model_kind == ModelKind::dbt ? train_dbt(train, mc, report, hooks)
                                          : train_card_t(train, mc, report, hooks);
}

EvalResult evaluate(const DiffusionModel& model, const Dataset& test, const RunConfig& cfg) {
  if (!test.labeled()) throw DataError("evaluation data has no response column");
  return evaluate_samples(model, test, sample(model, test, cfg.effective_samples(), cfg.model.seed),
                          cfg);
}

EvalResult evaluate_samples(const DiffusionModel& model, const Dataset& test,
                            const SampleMatrix& samples, const RunConfig& cfg) {
  if (!test.labeled()) throw DataError("evaluation data has no response column");
  if (samples.rows() != test.rows()) throw InvalidArgument("sample matrix does not match test rows");
  EvalResult r;
  r.task = model.config.task;
  r.rows = static_cast<std::size_t>(test.rows());
  r.samples = static_cast<int>(samples.cols());
  if (r.task == TaskKind::regression) {
    r.rmse = rmse(test.response, samples);
    r.nll = r.samples >= 2 ? nll(test.response, samples) : 0.0;
    r.qice = r.samples >= cfg.qice_bins ? qice(test.response, samples, cfg.qice_bins) : 0.0;
    return r;
  }
  const Classification cls = classify(samples, model.positive_rate);
  const Eigen::VectorXi truth = test.response.cast<int>();
  r.accuracy = accuracy(truth, cls.labels);
  const Eigen::VectorXd widths =
      piw(cfg.piw_scale == PiwScale::logit ? samples : cls.probabilities, cfg.piw_lo,
          cfg.piw_hi);
  std::vector<std::vector<TTest>> tests;
  if (r.samples >= 2)
    for (double a : cfg.alphas) tests.push_back(paired_t_tests(cls.probabilities, a));
  const std::vector<double> alphas = r.samples >= 2 ? cfg.alphas : std::vector<double>{};
  r.deferral = deferral_report(truth, cls.labels, widths, alphas, tests);
  return r;
}

std::vector<std::pair<std::string, double>> metric_values(const EvalResult& r) {
  if (r.task == TaskKind::regression)
    return {{"rmse", r.rmse}, {"nll", r.nll}, {"qice", r.qice}};
  std::vector<std::pair<std::string, double>> out{{"accuracy", 100.0 * r.accuracy}};
  if (r.deferral)
    for (const auto& a : r.deferral->alphas) {
      std::ostringstream k;
      k << "alpha=" << a.alpha;
      if (auto acc = a.reject.accuracy()) out.emplace_back("reject_accuracy@" + k.str(), 100.0 * *acc);
      if (auto acc = a.fail.accuracy()) out.emplace_back("fail_accuracy@" + k.str(), 100.0 * *acc);
      out.emplace_back("deferral_accuracy@" + k.str(), 100.0 * a.blended_accuracy);
    }
  return out;
}

void cmd_train(const RunConfig& cfg, const std::string& model_path, std::ostream& log) {
  echo_config(cfg, log);
  const Dataset data = load_training_data(cfg);
  TrainReport report;
  const DiffusionModel model = train_model(data, cfg, &report, &log);
  const std::string path = model_path.empty() ? default_model_path(cfg) : model_path;
  if (auto parent = std::filesystem::path(path).parent_path(); !parent.empty())
    std::filesystem::create_directories(parent);
  save_model(model, path);
  auto mse_log = open_out(out_path(cfg, "train_log.csv"));
  mse_log << "t,mse\n";
  for (int t = model.timesteps(); t >= 1; --t)
    mse_log << t << ',' << fmt(report.step_mse[static_cast<std::size_t>(t - 1)]) << '\n';
  log << "wrote " << path << " (" << model.step_trees.size() << " step trees)\n";
}

void write_samples_csv(const DiffusionModel& model, const SampleMatrix& samples,
                       std::ostream& out) {
  const bool clf = model.config.task == TaskKind::classification;
  out << (clf ? "row,sample,logit,probability\n" : "row,sample,value\n");
  for (Eigen::Index j = 0; j < samples.rows(); ++j)
    for (Eigen::Index s = 0; s < samples.cols(); ++s) {
      out << j << ',' << s << ',' << fmt(samples(j, s));
      if (clf) out << ',' << fmt(sigmoid(samples(j, s)));
      out << '\n';
    }
}

void cmd_sample(const RunConfig& cfg, const std::string& model_path,
                const std::string& data_path, std::ostream& out, std::ostream& log) {
  echo_config(cfg, log);
  const DiffusionModel model = load_model(model_path);
  const Dataset rows = load_rows_for(model, data_path, cfg, false);
  const int S = cfg.effective_samples();
  log << "sampling " << S << " draws for " << rows.rows() << " rows\n";
  write_samples_csv(model, sample(model, rows, S, cfg.model.seed), out);
}

EvalResult cmd_eval(const RunConfig& cfg, const std::string& model_path,
                    const std::string& data_path, std::ostream& out, std::ostream& log) {
  echo_config(cfg, log);
  const DiffusionModel model = load_model(model_path);
  const Dataset test = load_rows_for(model, data_path, cfg, true);
  RunConfig run = cfg;
  run.model.task = model.config.task;
  const EvalResult r = evaluate(model, test, run);
  out << "metric,value\n";
  for (const auto& [k, v] : metric_values(r)) out << k << ',' << fmt(v) << '\n';
  if (r.deferral) {
    out << '\n' << r.deferral->to_text();
    auto csv = open_out(out_path(cfg, "deferral_report.csv"));
    csv << r.deferral->to_csv();
  }
  return r;
}

FoldSummary cmd_eval_folds(const RunConfig& cfg, std::ostream& out, std::ostream& log) {
  echo_config(cfg, log);
  const Dataset data = load_training_data(cfg);
  FoldSummary summary;
  std::vector<std::string> names;
  std::vector<std::vector<double>> values;
  auto folds_csv = open_out(out_path(cfg, "eval_folds.csv"));
  folds_csv << "fold,metric,value\n";
  for (int k = 0; k < cfg.folds; ++k) {
    SplitSpec spec = cfg.split;
    spec.fold_index = cfg.split.fold_index + static_cast<std::uint64_t>(k);
    const Split split = make_split(data, spec);
    RunConfig run = cfg;
    run.model.seed = derive_seed(cfg.model.seed, kFoldStream, spec.fold_index);
    log << "fold " << k + 1 << "/" << cfg.folds << ": " << split.train.rows() << " train, "
        << split.test.rows() << " test\n";
    const DiffusionModel model = train_model(split.train, run, nullptr, &log);
    EvalResult r = evaluate(model, split.test, run);
    const auto m = metric_values(r);
    for (const auto& [name, v] : m) {
      auto it = std::find(names.begin(), names.end(), name);
      if (it == names.end()) {
        names.push_back(name);
        values.emplace_back();
        it = names.end() - 1;
      }
      values[static_cast<std::size_t>(it - names.begin())].push_back(v);
      folds_csv << k << ',' << name << ',' << fmt(v) << '\n';
      log << "  " << name << " = " << fmt(v) << '\n';
    }
    summary.folds.push_back(std::move(r));
  }
  out << "metric,mean,std,summary\n";
  for (std::size_t i = 0; i < names.size(); ++i) {
    const Summary s = summarize(values[i]);
    summary.metrics.emplace_back(names[i], s);
    out << names[i] << ',' << fmt(s.mean) << ',' << fmt(s.std) << ',' << format_summary(s)
        << '\n';
  }
  return summary;
}

std::vector<ImportanceRow> feature_importance(const DiffusionModel& model,
                                             const std::vector<int>& timesteps) {
  std::vector<std::string> names{"noisy_y"};
  for (const auto& c : model.schema.columns) names.push_back(c.name);
  names.push_back("f_phi");
  std::vector<ImportanceRow> out;
  for (int t : timesteps) {
    model.schedule.check_timestep(t);
    const Eigen::VectorXd gains = gain_importance(model.tree_at(t));
    std::vector<int> order(static_cast<std::size_t>(gains.size()));
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return gains(a) > gains(b); });
    for (std::size_t r = 0; r < order.size(); ++r)
      out.push_back({t, static_cast<int>(r) + 1, order[r], names[order[r]], gains(order[r])});
  }
  return out;
}

void cmd_importance(const RunConfig& cfg, const std::string& model_path, std::ostream& out,
                    std::ostream& log) {
  echo_config(cfg, log);
  const DiffusionModel model = load_model(model_path);
  const auto rows = feature_importance(model, cfg.importance_timesteps);
  out << "t,rank,feature,name,gain\n";
  for (const auto& r : rows)
    out << r.t << ',' << r.rank << ',' << r.feature << ',' << r.name << ',' << fmt(r.gain)
        << '\n';
}

void cmd_schedule(int timesteps, double beta_start, double beta_end, std::ostream& out) {
  const NoiseSchedule s = NoiseSchedule::linear(timesteps, beta_start, beta_end);
  out << "t,gamma0,gamma1,gamma2,tilde_beta\n" << std::setprecision(17);
  for (const auto& row : coefficient_table(s))
    out << row.t << ',' << row.gamma0 << ',' << row.gamma1 << ',' << row.gamma2 << ','
        << row.tilde_beta << '\n';
}

EvalResult cmd_toy(const RunConfig& cfg, std::ostream& log) {
  echo_config(cfg, log);
  const ToyTask task = toy_task_from_string(std::string(1, cfg.toy_task));
  Dataset data = toy_generate(task, cfg.toy_rows, derive_seed(cfg.model.seed, kToyStream));
  if (cfg.mcar_rate > 0.0)
    data = mcar_mask(data, cfg.mcar_rate, derive_seed(cfg.model.seed, kMcarStream));
  write_csv(data, out_path(cfg, "toy_data.csv"));
  SplitSpec spec = cfg.split;
  const Split split = make_split(data, spec);
  RunConfig run = cfg;
  run.model.task = TaskKind::regression;
  const DiffusionModel model = train_model(split.train, run, nullptr, &log);
  const int S = run.effective_samples();
  const SampleMatrix samples = sample(model, split.test, S, run.model.seed);
  {
    auto out = open_out(out_path(cfg, "toy_samples.csv"));
    out << "row,x,y_true,sample,value\n";
    for (Eigen::Index j = 0; j < samples.rows(); ++j)
      for (Eigen::Index s = 0; s < S; ++s)
        out << j << ',' << fmt(split.test.cells(j, 0)) << ',' << fmt(split.test.response(j))
            << ',' << s << ',' << fmt(samples(j, s)) << '\n';
  }
  const EvalResult r = evaluate_samples(model, split.test, samples, run);
  auto metrics = open_out(out_path(cfg, "toy_metrics.csv"));
  metrics << "metric,value\n";
  for (const auto& [k, v] : metric_values(r)) {
    metrics << k << ',' << fmt(v) << '\n';
    log << k << " = " << fmt(v) << '\n';
  }
  return r;
}

}  // namespace dbt
