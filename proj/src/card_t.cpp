#include "dbt/card_t.hpp"

#include <algorithm>

#include "diffusion_internal.hpp"

namespace dbt {

DiffusionModel train_card_t(const Dataset& train, const DbtConfig& config,
                            TrainReport* report, const TrainHooks& hooks,
                            const std::optional<std::vector<int>>& order) {
  detail::Prepared prepared = detail::prepare(train, config, ModelKind::card_t);
  DiffusionModel& model = prepared.model;
  const NoiseSchedule& s = model.schedule;
  const int T = s.timesteps();

  std::vector<int> steps;
  if (order) {
    steps = *order;
    std::vector<int> sorted = steps;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < static_cast<int>(sorted.size()); ++i)
      if (sorted.size() != static_cast<std::size_t>(T) || sorted[i] != i + 1)
        throw InvalidArgument("training order must be a permutation of 1..T");
  } else {
    for (int t = T; t >= 1; --t) steps.push_back(t);
  }

  detail::ReplicatedDesign design = detail::replicate(train, prepared, config.n_noise);
  const Eigen::Index R = design.inputs.rows();
  model.step_trees.assign(static_cast<std::size_t>(T), DecisionTree{});
  if (report) report->step_mse.assign(static_cast<std::size_t>(T), 0.0);

  for (int t : steps) {
    Rng rng = make_rng(config.seed, detail::kCardTTrainStream, static_cast<std::uint64_t>(t));
    const Eigen::VectorXd eps = standard_normal(R, rng);
    design.inputs.set_column(0, forward_sample(s, design.y0, design.prior_mean, t, eps));
    if (hooks.before_fit) hooks.before_fit(t, design.inputs);
    DecisionTree tree = fit_tree(design.inputs, eps, config.tree);
    if (hooks.after_fit) hooks.after_fit(t, tree);
    const double err = detail::mse(tree.predict(design.inputs), eps);
    if (report) report->step_mse[static_cast<std::size_t>(t - 1)] = err;
    if (hooks.progress) hooks.progress(t, err);
    model.step_trees[static_cast<std::size_t>(t - 1)] = std::move(tree);
  }
  return std::move(prepared.model);
}

SampleMatrix sample_card_t(const DiffusionModel& model, const Dataset& rows,
                           int samples, std::uint64_t seed) {
  if (model.kind != ModelKind::card_t) throw InvalidArgument("model is not a CARD-T model");
  const NoiseSchedule& s = model.schedule;
  return detail::run_reverse_chains(
      model, rows, samples, seed,
      [&](int t, const Eigen::VectorXd& y_t, const Eigen::VectorXd& eps_hat,
          const Eigen::VectorXd& mu) { return y0_from_noise(s, y_t, eps_hat, mu, t); });
}

SampleMatrix sample(const DiffusionModel& model, const Dataset& rows, int samples,
                    std::uint64_t seed) {
  return model.kind == ModelKind::dbt ? sample_dbt(model, rows, samples, seed)
                                      : sample_card_t(model, rows, samples, seed);
}

}  // namespace dbt
