#include "dbt/mean_estimator.hpp"

#include <cmath>

#include "dbt/errors.hpp"

namespace dbt {

namespace {

constexpr double kHessianFloor = 1e-6;

double training_loss(LossKind loss, const Eigen::VectorXd& raw,
                     const Eigen::Ref<const Eigen::VectorXd>& y) {
  if (loss == LossKind::squared) return 0.5 * (y - raw).squaredNorm() / y.size();
  double total = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    // log(1 + e^z) - y z, written to avoid overflow.
    const double z = raw(i);
    const double softplus = z > 0 ? z + std::log1p(std::exp(-z))
                                  : std::log1p(std::exp(z));
    total += softplus - y(i) * z;
  }
  return total / y.size();
}

}  // namespace

std::string to_string(LossKind kind) {
  return kind == LossKind::squared ? "squared" : "logistic";
}

LossKind loss_kind_from_string(const std::string& name) {
  if (name == "squared") return LossKind::squared;
  if (name == "logistic") return LossKind::logistic;
  throw InvalidArgument("unknown loss kind '" + name + "'");
}

MeanEstimator::MeanEstimator(LossKind loss, double base_score, double shrinkage,
                             std::vector<DecisionTree> trees)
    : loss_(loss),
      base_score_(base_score),
      shrinkage_(shrinkage),
      trees_(std::move(trees)) {
  if (!std::isfinite(base_score_)) throw DataError("base score is not finite");
}

double MeanEstimator::predict_raw(std::span<const double> row) const {
  double raw = base_score_;
  for (const auto& tree : trees_) raw += shrinkage_ * tree.predict(row);
  return raw;
}

double MeanEstimator::predict(std::span<const double> row) const {
  const double raw = predict_raw(row);
  return loss_ == LossKind::logistic ? sigmoid(raw) : raw;
}

Eigen::VectorXd MeanEstimator::predict_raw(const FeatureMatrix& x) const {
  Eigen::VectorXd raw = Eigen::VectorXd::Constant(x.rows(), base_score_);
  for (const auto& tree : trees_) raw += shrinkage_ * tree.predict(x);
  return raw;
}

Eigen::VectorXd MeanEstimator::predict(const FeatureMatrix& x) const {
  Eigen::VectorXd raw = predict_raw(x);
  if (loss_ == LossKind::logistic) raw = raw.unaryExpr(&sigmoid);
  return raw;
}

MeanEstimatorFit fit_mean_estimator(const FeatureMatrix& x,
                                    const Eigen::Ref<const Eigen::VectorXd>& y,
                                    const MeanEstimatorParams& params) {
  params.tree.validate();
  if (params.n_trees < 0) throw InvalidArgument("n_trees must be >= 0");
  if (!(params.shrinkage > 0.0))
    throw InvalidArgument("shrinkage must be positive");
  if (y.size() != x.rows() || y.size() == 0)
    throw InvalidArgument("mean estimator needs matching, non-empty data");
  if (!y.allFinite()) throw InvalidArgument("targets must be finite");

  double base = 0.0;
  if (params.loss == LossKind::squared) {
    base = y.mean();
  } else {
    for (Eigen::Index i = 0; i < y.size(); ++i)
      if (y(i) != 0.0 && y(i) != 1.0)
        throw DataError("logistic loss needs labels in {0, 1}");
    const double rate = y.mean();
    if (rate == 0.0 || rate == 1.0)
      throw DataError("logistic loss needs both classes present");
    base = logit(rate);
  }

  const int n_features = static_cast<int>(x.cols());
  Eigen::VectorXd raw = Eigen::VectorXd::Constant(y.size(), base);
  std::vector<DecisionTree> trees;
  trees.reserve(static_cast<std::size_t>(params.n_trees));
  std::vector<double> trace{training_loss(params.loss, raw, y)};

  Eigen::VectorXd grad(y.size());
  for (int m = 0; m < params.n_trees; ++m) {
    if (params.loss == LossKind::squared) {
      grad = y - raw;
    } else {
      for (Eigen::Index i = 0; i < y.size(); ++i) grad(i) = y(i) - sigmoid(raw(i));
    }
    DecisionTree tree = fit_tree(x, grad, params.tree);
    const Eigen::VectorXi leaf = tree.leaf_indices(x);
    if (params.loss == LossKind::logistic) {
      // One Newton step per leaf: sum(g) / sum(h).
      const int n_leaves = tree.num_leaves();
      std::vector<double> g(n_leaves, 0.0), h(n_leaves, 0.0);
      for (Eigen::Index i = 0; i < y.size(); ++i) {
        const double p = sigmoid(raw(i));
        g[leaf(i)] += grad(i);
        h[leaf(i)] += p * (1.0 - p);
      }
      for (int l = 0; l < n_leaves; ++l)
        tree.set_leaf_value(l, g[l] / std::max(h[l], kHessianFloor));
    } else if (tree.num_leaves() == 1 && tree.leaf_values()[0] != 0.0 &&
               std::abs(tree.leaf_values()[0]) < 1e-15 * (1.0 + std::abs(base))) {
      tree = DecisionTree::constant(0.0, n_features);
    }
    for (Eigen::Index i = 0; i < y.size(); ++i)
      raw(i) += params.shrinkage * tree.leaf_values()[leaf(i)];
    trees.push_back(std::move(tree));
    trace.push_back(training_loss(params.loss, raw, y));
  }
  return {MeanEstimator(params.loss, base, params.shrinkage, std::move(trees)),
          std::move(trace)};
}

}  // namespace dbt
