#include "dbt/dbt.hpp"

#include <cmath>

#include "diffusion_internal.hpp"

namespace dbt {

std::string to_string(ModelKind kind) {
  return kind == ModelKind::dbt ? "dbt" : "card_t";
}

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "dbt") return ModelKind::dbt;
  if (name == "card_t" || name == "card-t") return ModelKind::card_t;
  throw InvalidArgument("unknown model kind '" + name + "' (expected dbt or card_t)");
}

std::string to_string(PriorMean mode) {
  return mode == PriorMean::estimator ? "estimator" : "zero";
}

PriorMean prior_mean_from_string(const std::string& name) {
  if (name == "estimator" || name == "f_phi") return PriorMean::estimator;
  if (name == "zero") return PriorMean::zero;
  throw InvalidArgument("unknown prior mean mode '" + name + "'");
}

void DbtConfig::validate() const {
  if (timesteps < 2) throw InvalidArgument("timesteps must be >= 2");
  if (n_noise < 1) throw InvalidArgument("n_noise must be >= 1");
  if (!(prototype_epsilon > 0.0 && prototype_epsilon < 0.5))
    throw InvalidArgument("prototype_epsilon must lie in (0, 0.5)");
  tree.validate();
  mean_estimator.tree.validate();
  if (mean_estimator.n_trees < 0) throw InvalidArgument("mean estimator n_trees must be >= 0");
  if (!(mean_estimator.shrinkage > 0.0))
    throw InvalidArgument("mean estimator shrinkage must be positive");
  (void)schedule();
}

const DecisionTree& DiffusionModel::tree_at(int t) const {
  schedule.check_timestep(t);
  return step_trees.at(static_cast<std::size_t>(t - 1));
}

Eigen::VectorXd encode_prototypes(const Eigen::Ref<const Eigen::VectorXd>& labels,
                                  double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 0.5))
    throw InvalidArgument("prototype epsilon must lie in (0, 0.5)");
  Eigen::VectorXd out(labels.size());
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    if (labels(i) != 0.0 && labels(i) != 1.0)
      throw DataError("label at row " + std::to_string(i) + " is not 0 or 1");
    out(i) = encode_probability(labels(i), epsilon);
  }
  return out;
}

double encode_probability(double p, double epsilon) {
  return logit(p * (1.0 - 2.0 * epsilon) + epsilon);
}

Classification classify(const Eigen::Ref<const SampleMatrix>& logits,
                        double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0))
    throw InvalidArgument("classification threshold must lie in (0, 1)");
  Classification c;
  c.probabilities = logits.unaryExpr(&sigmoid);
  c.labels.resize(logits.rows());
  const Eigen::Index S = logits.cols();
  for (Eigen::Index j = 0; j < logits.rows(); ++j) {
    const auto votes = (c.probabilities.row(j).array() >= threshold).count();
    if (2 * votes > S)
      c.labels(j) = 1;
    else if (2 * votes < S)
      c.labels(j) = 0;
    else
      c.labels(j) = c.probabilities.row(j).mean() >= threshold ? 1 : 0;
  }
  return c;
}

void check_schema(const DiffusionModel& model, const Dataset& rows) {
  const auto& expected = model.schema.columns;
  if (static_cast<Eigen::Index>(expected.size()) != rows.features())
    throw DataError("data has " + std::to_string(rows.features()) +
                    " feature columns, model expects " +
                    std::to_string(expected.size()));
  for (std::size_t j = 0; j < expected.size(); ++j) {
    const ColumnSpec& got = rows.schema.columns[j];
    if (got.name != expected[j].name)
      throw DataError("column " + std::to_string(j) + " is '" + got.name +
                      "', model expects '" + expected[j].name + "'");
    if (got.kind != expected[j].kind)
      throw DataError("column '" + got.name + "' has a different kind than in training");
    if (got.kind == FeatureKind::categorical && got.categories != expected[j].categories)
      throw DataError("column '" + got.name +
                      "' uses a different category dictionary; load it with the model schema");
  }
}

Eigen::VectorXd mean_feature(const DiffusionModel& model, const Dataset& rows) {
  return model.mean_estimator.predict(to_feature_matrix(rows));
}

Eigen::VectorXd prior_mean(const DiffusionModel& model,
                           const Eigen::Ref<const Eigen::VectorXd>& fphi) {
  if (model.config.prior_mean == PriorMean::zero)
    return Eigen::VectorXd::Zero(fphi.size());
  if (model.config.task == TaskKind::classification)
    return fphi.unaryExpr([&](double p) {
      return encode_probability(p, model.config.prototype_epsilon);
    });
  return fphi;
}

namespace detail {

Prepared prepare(const Dataset& train, const DbtConfig& config, ModelKind kind) {
  config.validate();
  train.validate();
  if (train.rows() == 0) throw InvalidArgument("training data is empty");
  if (!train.labeled()) throw DataError("training data has no response column");

  Prepared out;
  DiffusionModel& m = out.model;
  m.kind = kind;
  m.config = config;
  m.schedule = config.schedule();
  m.schema = train.schema;

  MeanEstimatorParams mp = config.mean_estimator;
  if (config.task == TaskKind::classification) {
    mp.loss = LossKind::logistic;
    out.y0 = encode_prototypes(train.response, config.prototype_epsilon);
    m.positive_rate = train.response.mean();
    m.target_transform = {};
    const FeatureMatrix x = to_feature_matrix(train);
    m.mean_estimator = fit_mean_estimator(x, train.response, mp).estimator;
  } else {
    mp.loss = LossKind::squared;
    const double mean = train.response.mean();
    const double sd = std::sqrt((train.response.array() - mean).square().mean());
    m.target_transform = {mean, std::max(sd, kStdFloor)};
    out.y0 = train.response.unaryExpr([&](double v) { return m.target_transform.apply(v); });
    const FeatureMatrix x = to_feature_matrix(train);
    m.mean_estimator = fit_mean_estimator(x, out.y0, mp).estimator;
  }
  out.mean_feature = mean_feature(m, train);
  out.prior_mean = prior_mean(m, out.mean_feature);
  return out;
}

ReplicatedDesign replicate(const Dataset& train, const Prepared& prepared, int n_noise) {
  const Eigen::Index n = train.rows();
  const Eigen::Index p = train.features();
  const Eigen::Index rows = n * n_noise;
  Eigen::MatrixXd values(rows, p + 2);
  std::vector<FeatureKind> kinds;
  kinds.reserve(static_cast<std::size_t>(p + 2));
  kinds.push_back(FeatureKind::numeric);
  for (auto k : train.kinds()) kinds.push_back(k);
  kinds.push_back(FeatureKind::numeric);

  ReplicatedDesign d;
  d.y0.resize(rows);
  d.prior_mean.resize(rows);
  values.col(0).setZero();
  for (int k = 0; k < n_noise; ++k) {
    const Eigen::Index off = k * n;
    values.block(off, 1, n, p) = train.cells;
    values.block(off, p + 1, n, 1) = prepared.mean_feature;
    d.y0.segment(off, n) = prepared.y0;
    d.prior_mean.segment(off, n) = prepared.prior_mean;
  }
  d.inputs = FeatureMatrix(std::move(values), std::move(kinds));
  return d;
}

Eigen::VectorXd predict_with_noisy(const DecisionTree& tree,
                                   const FeatureMatrix& inputs,
                                   const Eigen::VectorXd& noisy) {
  Eigen::VectorXd out(inputs.rows());
  for (Eigen::Index r = 0; r < inputs.rows(); ++r)
    out(r) = tree.predict_with([&](int f) { return f == 0 ? noisy(r) : inputs(r, f); });
  return out;
}

double mse(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).squaredNorm() / static_cast<double>(a.size());
}

}  // namespace detail

DiffusionModel train_dbt(const Dataset& train, const DbtConfig& config,
                         TrainReport* report, const TrainHooks& hooks) {
  detail::Prepared prepared = detail::prepare(train, config, ModelKind::dbt);
  DiffusionModel& model = prepared.model;
  const NoiseSchedule& s = model.schedule;
  const int T = s.timesteps();
  detail::ReplicatedDesign design = detail::replicate(train, prepared, config.n_noise);
  const Eigen::Index R = design.inputs.rows();

  model.step_trees.assign(static_cast<std::size_t>(T), DecisionTree{});
  if (report) report->step_mse.assign(static_cast<std::size_t>(T), 0.0);

  Eigen::VectorXd noisy(R);
  for (int t = T; t >= 1; --t) {
    Rng rng = make_rng(config.seed, detail::kDbtTrainStream, static_cast<std::uint64_t>(t));
    if (t == T) {
      noisy = design.prior_mean + standard_normal(R, rng);
    } else {
      // y_{t+1} from the forward marginal, denoised by the tree just fitted,
      // then one posterior draw down to timestep t.
      const Eigen::VectorXd eps = standard_normal(R, rng);
      const Eigen::VectorXd y_next = forward_sample(s, design.y0, design.prior_mean, t + 1, eps);
      const Eigen::VectorXd y0_hat =
          detail::predict_with_noisy(model.tree_at(t + 1), design.inputs, y_next);
      noisy = posterior_sample(
          s, posterior_mean(s, y_next, y0_hat, design.prior_mean, t + 1), t + 1, rng);
    }
    design.inputs.set_column(0, noisy);
    if (hooks.before_fit) hooks.before_fit(t, design.inputs);
    DecisionTree tree = fit_tree(design.inputs, design.y0, config.tree);
    if (hooks.after_fit) hooks.after_fit(t, tree);
    const double err = detail::mse(tree.predict(design.inputs), design.y0);
    if (report) report->step_mse[static_cast<std::size_t>(t - 1)] = err;
    if (hooks.progress) hooks.progress(t, err);
    model.step_trees[static_cast<std::size_t>(t - 1)] = std::move(tree);
  }
  return std::move(prepared.model);
}

SampleMatrix sample_dbt(const DiffusionModel& model, const Dataset& rows,
                        int samples, std::uint64_t seed) {
  if (model.kind != ModelKind::dbt) throw InvalidArgument("model is not a DBT model");
  return detail::run_reverse_chains(
      model, rows, samples, seed,
      [](int, const Eigen::VectorXd&, const Eigen::VectorXd& tree_out,
         const Eigen::VectorXd&) { return tree_out; });
}

}  // namespace dbt
