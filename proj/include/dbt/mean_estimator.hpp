#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dbt/tree.hpp"

namespace dbt {

enum class LossKind : std::uint8_t { squared = 0, logistic = 1 };

std::string to_string(LossKind kind);
LossKind loss_kind_from_string(const std::string& name);

struct MeanEstimatorParams {
  int n_trees = 100;
  double shrinkage = 0.05;
  TreeParams tree{31, 20, 1.0, 256};
  LossKind loss = LossKind::squared;
};

// Stagewise gradient-boosted trees estimating E[y | x] (squared loss) or
// P(y = 1 | x) (logistic loss).
class MeanEstimator {
public:
  MeanEstimator() = default;
  MeanEstimator(LossKind loss, double base_score, double shrinkage,
                std::vector<DecisionTree> trees);

  LossKind loss() const { return loss_; }
  double base_score() const { return base_score_; }
  double shrinkage() const { return shrinkage_; }
  const std::vector<DecisionTree>& trees() const { return trees_; }

  double predict_raw(std::span<const double> row) const;
  double predict(std::span<const double> row) const;
  Eigen::VectorXd predict_raw(const FeatureMatrix& x) const;
  // Squared loss: raw score. Logistic loss: sigmoid of the raw score.
  Eigen::VectorXd predict(const FeatureMatrix& x) const;

  friend bool operator==(const MeanEstimator&, const MeanEstimator&) = default;

private:
  LossKind loss_ = LossKind::squared;
  double base_score_ = 0.0;
  double shrinkage_ = 0.05;
  std::vector<DecisionTree> trees_;
};

struct MeanEstimatorFit {
  MeanEstimator estimator;
  // Training loss before the first stage and after each stage.
  std::vector<double> loss_trace;
};

MeanEstimatorFit fit_mean_estimator(const FeatureMatrix& x,
                                    const Eigen::Ref<const Eigen::VectorXd>& y,
                                    const MeanEstimatorParams& params);

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace dbt
