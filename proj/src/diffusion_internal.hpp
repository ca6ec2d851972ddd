#pragma once

#include <string>

#include "dbt/dbt.hpp"
#include "dbt/parallel.hpp"

namespace dbt::detail {

// Random stream tags; each (seed, tag, t) pair is an independent stream.
inline constexpr std::uint64_t kDbtTrainStream = 0xdb7;
inline constexpr std::uint64_t kCardTTrainStream = 0xca7d;
inline constexpr std::uint64_t kSampleStream = 0x5a3b;

// Model shell with the mean estimator fitted, plus per-row training targets
// in diffusion scale.
struct Prepared {
  DiffusionModel model;
  Eigen::VectorXd y0;
  Eigen::VectorXd mean_feature;
  Eigen::VectorXd prior_mean;
};

Prepared prepare(const Dataset& train, const DbtConfig& config, ModelKind kind);

// Training rows replicated n_noise times: replica k of row i sits at
// k * N + i. Column 0 is the noisy response (initially zero), columns
// 1..p the features, and the last column f_phi(x).
struct ReplicatedDesign {
  FeatureMatrix inputs;
  Eigen::VectorXd y0;
  Eigen::VectorXd prior_mean;
};

ReplicatedDesign replicate(const Dataset& train, const Prepared& prepared,
                           int n_noise);

// Tree output for every replicated row with column 0 replaced by `noisy`.
Eigen::VectorXd predict_with_noisy(const DecisionTree& tree,
                                   const FeatureMatrix& inputs,
                                   const Eigen::VectorXd& noisy);

double mse(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

// Reverse chains for every row. `estimate_y0(t, y_t, tree_out, mu)` turns the
// step tree output into the y0 estimate for timestep t.
template <typename EstimateY0>
SampleMatrix run_reverse_chains(const DiffusionModel& model, const Dataset& rows,
                                int samples, std::uint64_t seed,
                                EstimateY0&& estimate_y0) {
  if (samples < 1) throw InvalidArgument("samples per row must be >= 1");
  check_schema(model, rows);
  const Eigen::VectorXd fphi = mean_feature(model, rows);
  const Eigen::VectorXd mu = prior_mean(model, fphi);
  const NoiseSchedule& s = model.schedule;
  const int T = s.timesteps();
  const Eigen::Index p = rows.features();
  SampleMatrix out(rows.rows(), samples);

  parallel_for(static_cast<std::size_t>(rows.rows()), [&](std::size_t idx) {
    const auto j = static_cast<Eigen::Index>(idx);
    Rng rng = make_rng(seed, kSampleStream, static_cast<std::uint64_t>(j));
    Eigen::VectorXd input(p + 2);
    input.segment(1, p) = rows.cells.row(j).transpose();
    input(p + 1) = fphi(j);
    const Eigen::VectorXd mu_j = Eigen::VectorXd::Constant(samples, mu(j));
    Eigen::VectorXd y_t = mu_j + standard_normal(samples, rng);
    Eigen::VectorXd tree_out(samples);
    Eigen::VectorXd y0_hat(samples);
    for (int t = T; t >= 1; --t) {
      const DecisionTree& tree = model.tree_at(t);
      for (int k = 0; k < samples; ++k) {
        input(0) = y_t(k);
        tree_out(k) = tree.predict_with([&](int f) { return input(f); });
      }
      y0_hat = estimate_y0(t, y_t, tree_out, mu_j);
      if (t > 1) y_t = posterior_sample(s, posterior_mean(s, y_t, y0_hat, mu_j, t), t, rng);
    }
    out.row(j) = y0_hat.transpose();
  });

  if (model.config.task == TaskKind::regression)
    out = out.unaryExpr([&](double v) { return model.target_transform.invert(v); });
  return out;
}

}  // namespace dbt::detail
