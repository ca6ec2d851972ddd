// dbt: train, sample and evaluate diffusion boosted tree models.

#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dbt/commands.hpp"
#include "dbt/errors.hpp"
#include "dbt/parallel.hpp"

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kInternal = 3 };

struct Flags {
  std::optional<std::string> config;
  std::vector<std::string> sets;
  std::map<std::string, std::optional<std::string>> keyed;
};

std::ostream& output(const std::optional<std::string>& path, std::ofstream& file) {
  if (!path || *path == "-") return std::cout;
  file.open(*path);
  if (!file) throw dbt::DataError("cannot open '" + *path + "' for writing");
  return file;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Diffusion boosted trees for tabular regression and binary classification"};
  app.require_subcommand(1);
  app.fallthrough();

  Flags flags;
  app.add_option("--config", flags.config, "key=value config file");
  app.add_option("--set", flags.sets, "override any config key (key=value), repeatable");
  const std::vector<std::pair<std::string, std::string>> keyed = {
      {"--seed", "seed"},           {"--model-kind", "model_kind"},
      {"--task", "task"},           {"--timesteps", "timesteps"},
      {"--n-noise", "n_noise"},     {"--num-leaves", "num_leaves"},
      {"--samples", "samples"},     {"--alpha", "alphas"},
      {"--mcar-rate", "mcar_rate"}, {"--threads", "threads"},
      {"--out-dir", "out_dir"},     {"--data", "data"},
      {"--folds", "folds"},         {"--response", "response_column"},
      {"--delimiter", "delimiter"}, {"--missing", "missing_sentinel"},
  };
  for (const auto& [flag, key] : keyed)
    app.add_option(flag, flags.keyed[key], "sets config key '" + key + "'");

  std::optional<std::string> model_path, out_file;

  auto* train = app.add_subcommand("train", "fit f_phi and the per-timestep trees");
  train->add_option("--model", model_path, "model file to write (default <out-dir>/model.dbt)");

  auto* sample = app.add_subcommand("sample", "draw response samples for each row");
  sample->add_option("--model", model_path, "trained model file")->required();
  sample->add_option("--output", out_file, "samples CSV (default stdout)");

  auto* eval = app.add_subcommand("eval", "score a model, or train and score across folds");
  eval->add_option("--model", model_path, "trained model file; omit with --folds");
  eval->add_option("--test-data", flags.keyed["test_data"], "labeled evaluation CSV");
  eval->add_option("--output", out_file, "metrics output (default stdout)");

  auto* importance = app.add_subcommand("importance", "per-timestep gain importance");
  importance->add_option("--model", model_path, "trained model file")->required();
  importance->add_option("--at", flags.keyed["importance_timesteps"],
                         "comma-separated timesteps (default 1000,800,600,400,200,1)");
  importance->add_option("--output", out_file, "CSV output (default stdout)");

  auto* schedule = app.add_subcommand("schedule", "posterior mean coefficients per timestep");
  schedule->add_option("--beta-start", flags.keyed["beta_start"], "first beta");
  schedule->add_option("--beta-end", flags.keyed["beta_end"], "last beta");
  schedule->add_option("--output", out_file, "CSV output (default stdout)");

  auto* toy = app.add_subcommand("toy", "generate a toy task, train, and sample it");
  toy->add_option("--toy", flags.keyed["toy_task"], "toy task a..e");
  toy->add_option("--rows", flags.keyed["toy_rows"], "rows to generate");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    dbt::RunConfig cfg;
    if (flags.config) cfg.merge_file(*flags.config);
    for (const auto& s : flags.sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw dbt::InvalidArgument("--set expects key=value");
      cfg.set(s.substr(0, eq), s.substr(eq + 1));
    }
    for (const auto& [key, value] : flags.keyed)
      if (value) cfg.set(key, *value);
    cfg.validate();
    dbt::set_thread_count(cfg.threads);

    std::ofstream file;
    if (train->parsed()) {
      dbt::cmd_train(cfg, model_path.value_or(""), std::cerr);
    } else if (sample->parsed()) {
      if (cfg.data.empty()) throw dbt::InvalidArgument("sample needs --data");
      dbt::cmd_sample(cfg, *model_path, cfg.data, output(out_file, file), std::cerr);
    } else if (eval->parsed()) {
      if (model_path) {
        const std::string& path = cfg.test_data.empty() ? cfg.data : cfg.test_data;
        if (path.empty()) throw dbt::InvalidArgument("eval needs --test-data or --data");
        dbt::cmd_eval(cfg, *model_path, path, output(out_file, file), std::cerr);
      } else {
        dbt::cmd_eval_folds(cfg, output(out_file, file), std::cerr);
      }
    } else if (importance->parsed()) {
      dbt::cmd_importance(cfg, *model_path, output(out_file, file), std::cerr);
    } else if (schedule->parsed()) {
      std::cerr << "# effective config\n" << cfg.format() << "# end config\n";
      dbt::cmd_schedule(cfg.model.timesteps, cfg.model.beta_start, cfg.model.beta_end,
                        output(out_file, file));
    } else if (toy->parsed()) {
      dbt::cmd_toy(cfg, std::cerr);
    }
    return kOk;
  } catch (const dbt::InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const dbt::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kInternal;
  }
}
