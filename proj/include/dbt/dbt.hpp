#pragma once

// Diffusion Boosted Trees: one CART regressor per diffusion timestep, each
// predicting y0 from (noisy y, x, f_phi(x)). Trees are fitted from t = T down
// to 1, and tree t sees noisy inputs produced by tree t + 1 exactly as it
// would during sampling.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dbt/dataset.hpp"
#include "dbt/mean_estimator.hpp"
#include "dbt/random.hpp"
#include "dbt/schedule.hpp"
#include "dbt/tree.hpp"

namespace dbt {

enum class ModelKind : std::uint8_t { dbt = 0, card_t = 1 };
std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

// Where the diffusion prior N(mu_T, 1) is centred.
enum class PriorMean : std::uint8_t { estimator = 0, zero = 1 };
std::string to_string(PriorMean mode);
PriorMean prior_mean_from_string(const std::string& name);

struct DbtConfig {
  int timesteps = kDefaultTimesteps;
  double beta_start = kDefaultBetaStart;
  double beta_end = kDefaultBetaEnd;
  int n_noise = 100;
  TreeParams tree{101, 20, 1.0, 256};
  // Loss kind is taken from `task`.
  MeanEstimatorParams mean_estimator{};
  PriorMean prior_mean = PriorMean::estimator;
  TaskKind task = TaskKind::regression;
  double prototype_epsilon = 0.01;
  std::uint64_t seed = 0;

  void validate() const;
  NoiseSchedule schedule() const {
    return NoiseSchedule::linear(timesteps, beta_start, beta_end);
  }
};

// Shared container for DBT and CARD-T models. step_trees[t - 1] is the tree
// for timestep t; its inputs are (noisy y, x..., f_phi(x)).
struct DiffusionModel {
  ModelKind kind = ModelKind::dbt;
  DbtConfig config;
  NoiseSchedule schedule = NoiseSchedule::linear(2, 0.1, 0.2);
  MeanEstimator mean_estimator;
  std::vector<DecisionTree> step_trees;
  Schema schema;
  // Regression targets are standardized before diffusion; identity for
  // classification.
  AffineTransform target_transform;
  // Training positive rate, the default decision threshold (classification).
  double positive_rate = 0.5;

  int timesteps() const { return schedule.timesteps(); }
  int input_width() const { return static_cast<int>(schema.columns.size()) + 2; }
  const DecisionTree& tree_at(int t) const;
};

using DbtModel = DiffusionModel;

using SampleMatrix = Eigen::MatrixXd;  // rows x samples

struct TrainReport {
  // Training MSE of each step tree on its own targets, indexed by t - 1.
  std::vector<double> step_mse;
};

struct TrainHooks {
  // Called right after the tree for timestep t is fitted; may replace it.
  std::function<void(int t, DecisionTree& tree)> after_fit;
  // Called with each timestep's tree inputs just before fitting.
  std::function<void(int t, const FeatureMatrix& inputs)> before_fit;
  // Receives per-timestep progress (t, training MSE).
  std::function<void(int t, double mse)> progress;
};

DiffusionModel train_dbt(const Dataset& train, const DbtConfig& config,
                         TrainReport* report = nullptr,
                         const TrainHooks& hooks = {});

// Ancestral sampling; each row's chains draw from a stream derived from
// (seed, row), so output does not depend on threading.
SampleMatrix sample_dbt(const DiffusionModel& model, const Dataset& rows,
                        int samples, std::uint64_t seed);

// Dispatches on model.kind.
SampleMatrix sample(const DiffusionModel& model, const Dataset& rows,
                    int samples, std::uint64_t seed);

// Label c in {0, 1} maps to logit(c (1 - 2 eps) + eps).
Eigen::VectorXd encode_prototypes(const Eigen::Ref<const Eigen::VectorXd>& labels,
                                  double epsilon);
// The same map extended to probabilities in [0, 1].
double encode_probability(double p, double epsilon);

struct Classification {
  Eigen::VectorXi labels;
  Eigen::MatrixXd probabilities;  // sigmoid of each sample
};

Classification classify(const Eigen::Ref<const SampleMatrix>& logits,
                        double threshold);

// Conditional-mean feature f_phi(x) for each row, in the model's f_phi scale
// (standardized response, or probability), and the matching prior mean.
Eigen::VectorXd mean_feature(const DiffusionModel& model, const Dataset& rows);
Eigen::VectorXd prior_mean(const DiffusionModel& model,
                           const Eigen::Ref<const Eigen::VectorXd>& mean_feature);

// Checks a dataset's feature columns against the model schema, naming the
// first offending column.
void check_schema(const DiffusionModel& model, const Dataset& rows);

}  // namespace dbt
