#include "dbt/tree.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <string>

#include "dbt/errors.hpp"

namespace dbt {

void TreeParams::validate() const {
  if (num_leaves < 2) throw InvalidArgument("num_leaves must be >= 2");
  if (min_samples_leaf < 1)
    throw InvalidArgument("min_samples_leaf must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw InvalidArgument("tree learning_rate must be positive");
  if (max_categorical_cardinality < 2)
    throw InvalidArgument("max_categorical_cardinality must be >= 2");
}

// ---------------------------------------------------------------------------
// FeatureMatrix

FeatureMatrix::FeatureMatrix(Eigen::MatrixXd values,
                             std::vector<FeatureKind> kinds)
    : values_(std::move(values)), kinds_(std::move(kinds)) {
  if (static_cast<Eigen::Index>(kinds_.size()) != values_.cols())
    throw InvalidArgument("feature kind count " + std::to_string(kinds_.size()) +
                          " does not match column count " +
                          std::to_string(values_.cols()));
  if (values_.rows() > static_cast<Eigen::Index>(UINT32_MAX))
    throw InvalidArgument("too many rows for a feature matrix");
  order_.resize(kinds_.size());
  category_count_.assign(kinds_.size(), 0);
  for (Eigen::Index c = 0; c < values_.cols(); ++c) index_column(c);
}

void FeatureMatrix::set_column(Eigen::Index col,
                               const Eigen::Ref<const Eigen::VectorXd>& v) {
  if (v.size() != values_.rows())
    throw InvalidArgument("replacement column has wrong length");
  values_.col(col) = v;
  index_column(col);
}

void FeatureMatrix::index_column(Eigen::Index col) {
  const auto column = values_.col(col);
  if (kinds_[col] == FeatureKind::categorical) {
    order_[col].clear();
    int count = 0;
    for (Eigen::Index r = 0; r < column.size(); ++r) {
      const double v = column(r);
      if (is_missing(v) || v < 0) continue;
      if (v != std::floor(v))
        throw DataError("categorical column " + std::to_string(col) +
                        " holds a non-integer code");
      count = std::max(count, static_cast<int>(v) + 1);
    }
    category_count_[col] = count;
    return;
  }
  auto& order = order_[col];
  order.clear();
  order.reserve(static_cast<std::size_t>(column.size()));
  for (Eigen::Index r = 0; r < column.size(); ++r)
    if (!is_missing(column(r))) order.push_back(static_cast<std::uint32_t>(r));
  std::stable_sort(order.begin(), order.end(),
                   [&](std::uint32_t a, std::uint32_t b) {
                     return column(a) < column(b);
                   });
}

// ---------------------------------------------------------------------------
// TreeNode / DecisionTree

int TreeNode::route(double value) const {
  if (is_missing(value)) return -1;
  if (kind == SplitKind::threshold) return value <= threshold ? 1 : 0;
  if (value < 0 || value != std::floor(value)) return -1;
  const auto code = static_cast<std::int32_t>(value);
  if (std::binary_search(left_categories.begin(), left_categories.end(), code))
    return 1;
  if (std::binary_search(right_categories.begin(), right_categories.end(),
                         code))
    return 0;
  return -1;
}

bool operator==(const TreeNode& a, const TreeNode& b) {
  return a.feature == b.feature && a.kind == b.kind &&
         a.threshold == b.threshold && a.left_categories == b.left_categories &&
         a.right_categories == b.right_categories &&
         a.default_left == b.default_left && a.left == b.left &&
         a.right == b.right && a.gain == b.gain;
}

bool operator==(const DecisionTree& a, const DecisionTree& b) {
  return a.num_features_ == b.num_features_ && a.nodes_ == b.nodes_ &&
         a.leaf_values_ == b.leaf_values_;
}

DecisionTree::DecisionTree(std::vector<TreeNode> nodes,
                           std::vector<double> leaf_values, int num_features)
    : nodes_(std::move(nodes)),
      leaf_values_(std::move(leaf_values)),
      num_features_(num_features) {
  if (leaf_values_.size() != nodes_.size() + 1)
    throw DataError("tree must have exactly one more leaf than internal nodes");
  for (double v : leaf_values_)
    if (!std::isfinite(v)) throw DataError("tree leaf value is not finite");
  const auto n_nodes = static_cast<std::int32_t>(nodes_.size());
  const auto n_leaves = static_cast<std::int32_t>(leaf_values_.size());
  std::vector<int> node_refs(nodes_.size(), 0);
  std::vector<int> leaf_refs(leaf_values_.size(), 0);
  for (const auto& node : nodes_) {
    if (node.feature < 0 || node.feature >= num_features_)
      throw DataError("tree node references feature out of range");
    for (std::int32_t child : {node.left, node.right}) {
      if (child >= 0) {
        if (child >= n_nodes) throw DataError("tree child index out of range");
        ++node_refs[child];
      } else {
        const std::int32_t leaf = ~child;
        if (leaf >= n_leaves) throw DataError("tree leaf index out of range");
        ++leaf_refs[leaf];
      }
    }
  }
  // A binary tree: root unreferenced, every other node and leaf referenced
  // once, and children always appear after their parent.
  if (!nodes_.empty() && node_refs[0] != 0)
    throw DataError("tree root is referenced as a child");
  for (std::size_t i = 1; i < node_refs.size(); ++i)
    if (node_refs[i] != 1) throw DataError("tree node is not referenced once");
  if (!nodes_.empty())
    for (int r : leaf_refs)
      if (r != 1) throw DataError("tree leaf is not referenced once");
  for (std::int32_t i = 0; i < n_nodes; ++i)
    for (std::int32_t child : {nodes_[i].left, nodes_[i].right})
      if (child >= 0 && child <= i) throw DataError("tree contains a cycle");
}

DecisionTree DecisionTree::constant(double value, int num_features) {
  return DecisionTree({}, {value}, num_features);
}

void DecisionTree::set_leaf_value(int leaf, double value) {
  if (!std::isfinite(value))
    throw InvalidArgument("leaf value must be finite");
  leaf_values_.at(static_cast<std::size_t>(leaf)) = value;
}

int DecisionTree::leaf_index(std::span<const double> row) const {
  if (static_cast<int>(row.size()) != num_features_)
    throw DataError("row has " + std::to_string(row.size()) +
                    " features, tree expects " + std::to_string(num_features_));
  return leaf_index_with([&](int f) { return row[f]; });
}

int DecisionTree::leaf_index(const FeatureMatrix& x, Eigen::Index row) const {
  return leaf_index_with([&](int f) { return x(row, f); });
}

Eigen::VectorXi DecisionTree::leaf_indices(const FeatureMatrix& x) const {
  if (x.cols() != num_features_)
    throw DataError("feature matrix has " + std::to_string(x.cols()) +
                    " columns, tree expects " + std::to_string(num_features_));
  Eigen::VectorXi out(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) out(r) = leaf_index(x, r);
  return out;
}

Eigen::VectorXd DecisionTree::predict(const FeatureMatrix& x) const {
  if (x.cols() != num_features_)
    throw DataError("feature matrix has " + std::to_string(x.cols()) +
                    " columns, tree expects " + std::to_string(num_features_));
  Eigen::VectorXd out(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    out(r) = leaf_values_[leaf_index(x, r)];
  return out;
}

Eigen::VectorXd DecisionTree::predict_dense(
    const Eigen::Ref<const Eigen::MatrixXd>& values) const {
  if (values.cols() != num_features_)
    throw DataError("matrix has " + std::to_string(values.cols()) +
                    " columns, tree expects " + std::to_string(num_features_));
  Eigen::VectorXd out(values.rows());
  for (Eigen::Index r = 0; r < values.rows(); ++r)
    out(r) = leaf_values_[leaf_index_with([&](int f) { return values(r, f); })];
  return out;
}

Eigen::VectorXd gain_importance(const DecisionTree& tree) {
  Eigen::VectorXd imp = Eigen::VectorXd::Zero(tree.num_features());
  for (const auto& node : tree.nodes()) imp(node.feature) += node.gain;
  return imp;
}

// ---------------------------------------------------------------------------
// Growth

namespace {

struct Split {
  double gain = 0.0;
  std::int32_t feature = -1;
  SplitKind kind = SplitKind::threshold;
  double threshold = 0.0;
  std::vector<std::int32_t> left_categories;
  std::vector<std::int32_t> right_categories;
  bool default_left = true;

  bool valid() const { return feature >= 0; }
};

struct Segment {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
};

struct Leaf {
  std::int32_t id = 0;
  std::int32_t parent = -1;  // node id, -1 for the root
  bool is_left = true;
  Segment rows;
  std::vector<Segment> present;  // per numeric feature, into sorted_[f]
  double sum = 0.0;
  double sse = 0.0;
  Split best;
};

// Squared-error reduction of splitting a node into (nl, sl) and (nr, sr).
inline double split_gain(double nl, double sl, double nr, double sr) {
  const double diff = sl / nl - sr / nr;
  return nl * nr / (nl + nr) * diff * diff;
}

class Grower {
public:
  Grower(const FeatureMatrix& x, std::span<const double> y,
         const TreeParams& params)
      : x_(x), y_(y), params_(params), min_leaf_(params.min_samples_leaf) {
    const auto n = static_cast<std::size_t>(x.rows());
    rows_.resize(n);
    std::iota(rows_.begin(), rows_.end(), 0u);
    sorted_.resize(static_cast<std::size_t>(x.cols()));
    for (Eigen::Index f = 0; f < x.cols(); ++f)
      if (x.kind(f) == FeatureKind::numeric) sorted_[f] = x.sorted_present(f);
    goes_left_.assign(n, 0);
    scratch_.resize(n);
  }

  DecisionTree grow() {
    Leaf root;
    root.rows = {0, rows_.size()};
    root.present.resize(sorted_.size());
    for (std::size_t f = 0; f < sorted_.size(); ++f)
      root.present[f] = {0, sorted_[f].size()};
    init_leaf(root);
    leaves_.push_back(std::move(root));

    while (static_cast<int>(leaves_.size()) < params_.num_leaves) {
      std::size_t pick = leaves_.size();
      double best_gain = 0.0;
      for (std::size_t i = 0; i < leaves_.size(); ++i) {
        const Split& s = leaves_[i].best;
        if (s.valid() && s.gain > best_gain) {
          best_gain = s.gain;
          pick = i;
        }
      }
      if (pick == leaves_.size()) break;
      split_leaf(pick);
    }

    std::vector<double> values(leaves_.size());
    for (const Leaf& leaf : leaves_)
      values[leaf.id] = leaf.sum / static_cast<double>(leaf.rows.size()) *
                        params_.learning_rate;
    return DecisionTree(std::move(nodes_), std::move(values),
                        static_cast<int>(x_.cols()));
  }

private:
  void init_leaf(Leaf& leaf) {
    double sum = 0.0;
    for (std::size_t i = leaf.rows.begin; i < leaf.rows.end; ++i)
      sum += y_[rows_[i]];
    const double n = static_cast<double>(leaf.rows.size());
    const double mean = sum / n;
    double sse = 0.0;
    for (std::size_t i = leaf.rows.begin; i < leaf.rows.end; ++i) {
      const double d = y_[rows_[i]] - mean;
      sse += d * d;
    }
    leaf.sum = sum;
    leaf.sse = sse;
    leaf.best = Split{};
    // Pure leaves (up to rounding of the mean) are final.
    if (sse <= n * 1e-24 * std::max(1.0, mean * mean)) return;
    if (leaf.rows.size() < 2 * static_cast<std::size_t>(min_leaf_)) return;
    for (Eigen::Index f = 0; f < x_.cols(); ++f) {
      if (x_.kind(f) == FeatureKind::numeric)
        scan_numeric(leaf, static_cast<std::int32_t>(f));
      else
        scan_categorical(leaf, static_cast<std::int32_t>(f));
    }
    if (leaf.best.valid() && !(leaf.best.gain > 1e-12 * sse))
      leaf.best = Split{};
  }

  struct Candidate {
    double gain = -std::numeric_limits<double>::infinity();
    bool default_left = true;
  };

  // Best of routing the missing rows left or right, given the present rows
  // going left (nl, sl). Gain is -inf when neither side meets min_leaf.
  Candidate evaluate(double n, double sum, double n_present, double s_present,
                     double nl, double sl) const {
    const double n_miss = n - n_present;
    const double min_leaf = min_leaf_;
    Candidate c;
    const double nr = n - nl;
    if (nl >= min_leaf && nr >= min_leaf) {
      c.gain = split_gain(nl, sl, nr, sum - sl);
      c.default_left = n_miss > 0 ? false : nl >= nr;
    }
    if (n_miss > 0) {
      const double lnl = nl + n_miss;
      const double rnr = n_present - nl;
      if (lnl >= min_leaf && rnr >= min_leaf) {
        const double g =
            split_gain(lnl, sl + (sum - s_present), rnr, s_present - sl);
        if (g > c.gain) {
          c.gain = g;
          c.default_left = true;
        }
      }
    }
    return c;
  }

  double current_best(const Leaf& leaf) const {
    return leaf.best.valid() ? leaf.best.gain
                             : -std::numeric_limits<double>::infinity();
  }

  void scan_numeric(Leaf& leaf, std::int32_t f) {
    const auto& order = sorted_[f];
    const Segment seg = leaf.present[f];
    if (seg.size() == 0) return;
    const auto column = x_.values().col(f);
    double s_present = 0.0;
    for (std::size_t i = seg.begin; i < seg.end; ++i) s_present += y_[order[i]];
    const double n = static_cast<double>(leaf.rows.size());
    const double n_present = static_cast<double>(seg.size());
    const bool has_missing = seg.size() < leaf.rows.size();

    double best_gain = current_best(leaf);
    bool found = false;
    bool best_dl = true;
    double best_threshold = 0.0;
    double nl = 0.0, sl = 0.0;
    for (std::size_t i = seg.begin; i < seg.end; ++i) {
      const std::uint32_t r = order[i];
      nl += 1.0;
      sl += y_[r];
      const double v = column(r);
      const bool last = i + 1 == seg.end;
      if (!last && column(order[i + 1]) == v) continue;
      if (last && !has_missing) break;
      const Candidate c = evaluate(n, leaf.sum, n_present, s_present, nl, sl);
      if (c.gain > best_gain) {
        best_gain = c.gain;
        best_dl = c.default_left;
        if (last) {
          best_threshold = v;
        } else {
          const double next = column(order[i + 1]);
          double mid = v + (next - v) * 0.5;
          if (!(mid < next)) mid = v;
          best_threshold = mid;
        }
        found = true;
      }
    }
    if (found) {
      Split s;
      s.gain = best_gain;
      s.feature = f;
      s.kind = SplitKind::threshold;
      s.threshold = best_threshold;
      s.default_left = best_dl;
      leaf.best = std::move(s);
    }
  }

  void scan_categorical(Leaf& leaf, std::int32_t f) {
    const int cardinality = x_.category_count(f);
    if (cardinality > params_.max_categorical_cardinality || cardinality == 0)
      return;
    cat_count_.assign(static_cast<std::size_t>(cardinality), 0.0);
    cat_sum_.assign(static_cast<std::size_t>(cardinality), 0.0);
    double n_present = 0.0, s_present = 0.0;
    for (std::size_t i = leaf.rows.begin; i < leaf.rows.end; ++i) {
      const std::uint32_t r = rows_[i];
      const double v = x_(r, f);
      if (is_missing(v) || v < 0) continue;
      const auto c = static_cast<std::size_t>(v);
      cat_count_[c] += 1.0;
      cat_sum_[c] += y_[r];
      n_present += 1.0;
      s_present += y_[r];
    }
    cats_.clear();
    for (int c = 0; c < cardinality; ++c)
      if (cat_count_[c] > 0) cats_.push_back(c);
    if (cats_.empty()) return;
    std::stable_sort(cats_.begin(), cats_.end(), [&](int a, int b) {
      return cat_sum_[a] / cat_count_[a] < cat_sum_[b] / cat_count_[b];
    });
    const double n = static_cast<double>(leaf.rows.size());
    const bool has_missing = n_present < n;

    double best_gain = current_best(leaf);
    std::size_t best_prefix = 0;
    bool best_dl = true;
    double nl = 0.0, sl = 0.0;
    for (std::size_t k = 0; k < cats_.size(); ++k) {
      nl += cat_count_[cats_[k]];
      sl += cat_sum_[cats_[k]];
      const bool last = k + 1 == cats_.size();
      if (last && !has_missing) break;
      const Candidate c = evaluate(n, leaf.sum, n_present, s_present, nl, sl);
      if (c.gain > best_gain) {
        best_gain = c.gain;
        best_prefix = k + 1;
        best_dl = c.default_left;
      }
    }
    if (best_prefix > 0) {
      Split s;
      s.gain = best_gain;
      s.feature = f;
      s.kind = SplitKind::category_set;
      s.default_left = best_dl;
      s.left_categories.assign(cats_.begin(), cats_.begin() + best_prefix);
      s.right_categories.assign(cats_.begin() + best_prefix, cats_.end());
      std::sort(s.left_categories.begin(), s.left_categories.end());
      std::sort(s.right_categories.begin(), s.right_categories.end());
      leaf.best = std::move(s);
    }
  }

  template <typename T>
  std::size_t stable_partition(std::vector<T>& buf, Segment seg) {
    std::size_t write = seg.begin;
    std::size_t spill = 0;
    for (std::size_t i = seg.begin; i < seg.end; ++i) {
      const T r = buf[i];
      if (goes_left_[r])
        buf[write++] = r;
      else
        scratch_[spill++] = static_cast<std::uint32_t>(r);
    }
    std::copy(scratch_.begin(), scratch_.begin() + spill, buf.begin() + write);
    return write;
  }

  void split_leaf(std::size_t index) {
    Leaf& parent = leaves_[index];
    Split split = std::move(parent.best);

    TreeNode node;
    node.feature = split.feature;
    node.kind = split.kind;
    node.threshold = split.threshold;
    node.left_categories = std::move(split.left_categories);
    node.right_categories = std::move(split.right_categories);
    node.default_left = split.default_left;
    node.gain = split.gain;

    for (std::size_t i = parent.rows.begin; i < parent.rows.end; ++i) {
      const std::uint32_t r = rows_[i];
      int dir = node.route(x_(r, split.feature));
      if (dir < 0) dir = node.default_left ? 1 : 0;
      goes_left_[r] = static_cast<std::uint8_t>(dir);
    }

    const auto node_id = static_cast<std::int32_t>(nodes_.size());
    const auto right_id = static_cast<std::int32_t>(leaves_.size());
    node.left = ~parent.id;
    node.right = ~right_id;
    if (parent.parent >= 0) {
      TreeNode& up = nodes_[parent.parent];
      (parent.is_left ? up.left : up.right) = node_id;
    }
    nodes_.push_back(std::move(node));

    Leaf right;
    right.id = right_id;
    right.parent = node_id;
    right.is_left = false;
    right.present.resize(sorted_.size());

    const std::size_t mid = stable_partition(rows_, parent.rows);
    right.rows = {mid, parent.rows.end};
    parent.rows.end = mid;
    for (std::size_t f = 0; f < sorted_.size(); ++f) {
      Segment& seg = parent.present[f];
      if (seg.size() == 0) {
        right.present[f] = {seg.end, seg.end};
        continue;
      }
      const std::size_t m = stable_partition(sorted_[f], seg);
      right.present[f] = {m, seg.end};
      seg.end = m;
    }
    parent.parent = node_id;
    parent.is_left = true;

    init_leaf(parent);
    init_leaf(right);
    leaves_.push_back(std::move(right));
  }

  const FeatureMatrix& x_;
  std::span<const double> y_;
  const TreeParams& params_;
  int min_leaf_;

  std::vector<std::uint32_t> rows_;
  std::vector<std::vector<std::uint32_t>> sorted_;
  std::vector<std::uint8_t> goes_left_;
  std::vector<std::uint32_t> scratch_;
  std::vector<double> cat_count_;
  std::vector<double> cat_sum_;
  std::vector<int> cats_;

  std::vector<Leaf> leaves_;
  std::vector<TreeNode> nodes_;
};

}  // namespace

DecisionTree fit_tree(const FeatureMatrix& x, std::span<const double> targets,
                      const TreeParams& params) {
  params.validate();
  if (x.rows() == 0) throw InvalidArgument("cannot fit a tree on empty data");
  if (static_cast<Eigen::Index>(targets.size()) != x.rows())
    throw InvalidArgument("target count does not match row count");
  for (double v : targets)
    if (!std::isfinite(v)) throw InvalidArgument("tree targets must be finite");
  return Grower(x, targets, params).grow();
}

}  // namespace dbt
