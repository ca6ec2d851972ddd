#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace dbt {

enum class FeatureKind : std::uint8_t { numeric = 0, categorical = 1 };

// Missing cells are NaN; numeric cells are otherwise finite and categorical
// cells hold a non-negative integer code. Negative codes mark categories the
// training data never saw; both route along a node's default direction.
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double v) { return std::isnan(v); }

struct TreeParams {
  int num_leaves = 101;
  int min_samples_leaf = 20;
  double learning_rate = 1.0;
  int max_categorical_cardinality = 256;

  void validate() const;
};

// Column-major training table. Numeric columns carry the row order of their
// present (non-missing) cells sorted by value, recomputed when a column is
// replaced, so repeated fits over mostly-fixed columns skip the sort.
class FeatureMatrix {
public:
  FeatureMatrix() = default;
  FeatureMatrix(Eigen::MatrixXd values, std::vector<FeatureKind> kinds);

  Eigen::Index rows() const { return values_.rows(); }
  Eigen::Index cols() const { return values_.cols(); }
  FeatureKind kind(Eigen::Index col) const { return kinds_[col]; }
  const std::vector<FeatureKind>& kinds() const { return kinds_; }
  double operator()(Eigen::Index row, Eigen::Index col) const {
    return values_(row, col);
  }
  const Eigen::MatrixXd& values() const { return values_; }

  void set_column(Eigen::Index col, const Eigen::Ref<const Eigen::VectorXd>& v);

  const std::vector<std::uint32_t>& sorted_present(Eigen::Index col) const {
    return order_[col];
  }
  // One past the largest category code seen in a categorical column.
  int category_count(Eigen::Index col) const { return category_count_[col]; }

private:
  void index_column(Eigen::Index col);

  Eigen::MatrixXd values_;
  std::vector<FeatureKind> kinds_;
  std::vector<std::vector<std::uint32_t>> order_;
  std::vector<int> category_count_;
};

enum class SplitKind : std::uint8_t { threshold = 0, category_set = 1 };

struct TreeNode {
  std::int32_t feature = 0;
  SplitKind kind = SplitKind::threshold;
  double threshold = 0.0;                     // left iff value <= threshold
  std::vector<std::int32_t> left_categories;  // sorted
  std::vector<std::int32_t> right_categories; // sorted
  bool default_left = true;
  // Child ids: >= 0 is an internal node, < 0 is ~leaf_index.
  std::int32_t left = -1;
  std::int32_t right = -1;
  double gain = 0.0;

  // 1 = left, 0 = right, -1 = take the default direction.
  int route(double value) const;
};

class DecisionTree {
public:
  DecisionTree() : leaf_values_{0.0} {}
  // Validates structure: every node reachable once, children in range,
  // finite leaves.
  DecisionTree(std::vector<TreeNode> nodes, std::vector<double> leaf_values,
               int num_features);

  static DecisionTree constant(double value, int num_features);

  int num_features() const { return num_features_; }
  int num_leaves() const { return static_cast<int>(leaf_values_.size()); }
  const std::vector<TreeNode>& nodes() const { return nodes_; }
  const std::vector<double>& leaf_values() const { return leaf_values_; }
  void set_leaf_value(int leaf, double value);

  int leaf_index(std::span<const double> row) const;
  double predict(std::span<const double> row) const {
    return leaf_values_[leaf_index(row)];
  }

  int leaf_index(const FeatureMatrix& x, Eigen::Index row) const;
  Eigen::VectorXi leaf_indices(const FeatureMatrix& x) const;
  Eigen::VectorXd predict(const FeatureMatrix& x) const;
  // Rows of a dense matrix laid out like the training columns.
  Eigen::VectorXd predict_dense(const Eigen::Ref<const Eigen::MatrixXd>& values) const;

  // Traversal over any cell accessor `get(feature) -> double`.
  template <typename Get>
  int leaf_index_with(Get&& get) const {
    if (nodes_.empty()) return 0;
    std::int32_t id = 0;
    while (id >= 0) {
      const TreeNode& node = nodes_[id];
      int dir = node.route(get(node.feature));
      if (dir < 0) dir = node.default_left ? 1 : 0;
      id = dir ? node.left : node.right;
    }
    return ~id;
  }
  template <typename Get>
  double predict_with(Get&& get) const {
    return leaf_values_[leaf_index_with(std::forward<Get>(get))];
  }

  friend bool operator==(const DecisionTree&, const DecisionTree&);

private:

  std::vector<TreeNode> nodes_;
  std::vector<double> leaf_values_;
  int num_features_ = 0;
};

bool operator==(const TreeNode& a, const TreeNode& b);

// Best-first CART growth on squared error. Missing cells are tried on both
// sides of every candidate; categorical columns are split by scanning their
// categories ordered by mean target.
DecisionTree fit_tree(const FeatureMatrix& x, std::span<const double> targets,
                      const TreeParams& params);

inline DecisionTree fit_tree(const FeatureMatrix& x,
                             const Eigen::Ref<const Eigen::VectorXd>& targets,
                             const TreeParams& params) {
  return fit_tree(x, std::span<const double>(targets.data(), targets.size()),
                  params);
}

// Per-feature sum of the squared-error reduction over all splits.
Eigen::VectorXd gain_importance(const DecisionTree& tree);

}  // namespace dbt
