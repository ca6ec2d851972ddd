#include <doctest.h>

#include <random>

#include "oracles/tree_oracle.hpp"
#include "dbt/errors.hpp"
#include "dbt/random.hpp"
#include "dbt/tree.hpp"

using namespace dbt;

namespace {

FeatureMatrix numeric(const Eigen::MatrixXd& x) {
  return FeatureMatrix(x, std::vector<FeatureKind>(x.cols(), FeatureKind::numeric));
}

double train_sse(const DecisionTree& t, const FeatureMatrix& x, const Eigen::VectorXd& y) {
  return (t.predict(x) - y).squaredNorm();
}

TreeParams params(int leaves, int min_leaf) {
  TreeParams p;
  p.num_leaves = leaves;
  p.min_samples_leaf = min_leaf;
  return p;
}

struct RandomCase {
  Eigen::MatrixXd x;
  std::vector<FeatureKind> kinds;
  std::vector<double> y;
  int min_leaf;
};

RandomCase random_case(Rng& rng) {
  std::uniform_int_distribution<int> rows(4, 50), cols(1, 3), cats(2, 6), leaf(1, 5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RandomCase c;
  const int n = rows(rng), p = cols(rng);
  c.min_leaf = leaf(rng);
  c.x.resize(n, p);
  for (int f = 0; f < p; ++f) {
    const bool cat = u(rng) < 0.4;
    const double miss = u(rng) < 0.5 ? 0.0 : 0.3 * u(rng);
    const int k = cats(rng);
    const bool coarse = u(rng) < 0.3;  // many tied numeric values
    c.kinds.push_back(cat ? FeatureKind::categorical : FeatureKind::numeric);
    for (int i = 0; i < n; ++i) {
      if (u(rng) < miss) {
        c.x(i, f) = kMissing;
      } else if (cat) {
        c.x(i, f) = std::floor(u(rng) * k);
      } else {
        c.x(i, f) = coarse ? std::floor(u(rng) * 5) : u(rng);
      }
    }
  }
  std::normal_distribution<double> z;
  for (int i = 0; i < n; ++i) {
    double signal = 0.0;
    for (int f = 0; f < p; ++f)
      signal += std::isnan(c.x(i, f)) ? 1.5 : std::sin(3.0 * c.x(i, f) + f);
    c.y.push_back(signal + 0.5 * z(rng));
  }
  return c;
}

}  // namespace

TEST_CASE("constant targets give a single leaf") {
  Eigen::MatrixXd x(30, 2);
  x.setRandom();
  const Eigen::VectorXd y = Eigen::VectorXd::Constant(30, 4.25);
  const DecisionTree t = fit_tree(numeric(x), y, params(101, 1));
  CHECK(t.num_leaves() == 1);
  CHECK(t.nodes().empty());
  CHECK(t.leaf_values()[0] == 4.25);
  CHECK(gain_importance(t).isZero());
}

TEST_CASE("step function gives a two-leaf tree") {
  Eigen::MatrixXd x(100, 1);
  Eigen::VectorXd y(100);
  for (int i = 0; i < 100; ++i) {
    x(i, 0) = i / 99.0;
    y(i) = x(i, 0) < 0.5 ? 0.0 : 1.0;
  }
  const FeatureMatrix fx = numeric(x);
  const DecisionTree t = fit_tree(fx, y, params(101, 20));
  REQUIRE(t.num_leaves() == 2);
  REQUIRE(t.nodes().size() == 1);
  CHECK(t.nodes()[0].threshold >= 0.49);
  CHECK(t.nodes()[0].threshold < 0.51);
  std::vector<double> leaves = t.leaf_values();
  std::sort(leaves.begin(), leaves.end());
  CHECK(leaves[0] == 0.0);
  CHECK(leaves[1] == 1.0);
  CHECK(t.predict(fx) == y);
  const Eigen::VectorXd imp = gain_importance(t);
  CHECK(imp(0) == doctest::Approx(25.0));  // 50 * 50 / 100 * 1^2
}

TEST_CASE("missing rows follow the gain-maximizing default direction") {
  const int n = 100;
  Eigen::MatrixXd x(n, 1);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    const bool miss = i % 10 < 3;
    x(i, 0) = miss ? kMissing : i / double(n);
    y(i) = miss ? 5.0 : 0.0;
  }
  const FeatureMatrix fx = numeric(x);
  const DecisionTree t = fit_tree(fx, y, params(101, 5));
  REQUIRE(t.nodes().size() >= 1);
  const double row[1] = {kMissing};
  CHECK(t.predict(row) == 5.0);
  CHECK(t.predict(fx) == y);
}

TEST_CASE("rows with every feature missing route deterministically") {
  Rng rng(5);
  const RandomCase c = random_case(rng);
  FeatureMatrix fx(c.x, c.kinds);
  const DecisionTree t = fit_tree(fx, std::span<const double>(c.y), params(8, 1));
  std::vector<double> row(c.kinds.size(), kMissing);
  const double first = t.predict(row);
  for (int k = 0; k < 5; ++k) CHECK(t.predict(row) == first);
  std::vector<double> unseen(c.kinds.size(), -1.0);
  for (std::size_t f = 0; f < c.kinds.size(); ++f)
    if (c.kinds[f] == FeatureKind::numeric) unseen[f] = kMissing;
  CHECK(t.predict(unseen) == first);
}

TEST_CASE("root split gain equals the brute-force maximum on random small data") {
  Rng rng(20240601);
  int split_cases = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const RandomCase c = random_case(rng);
    CAPTURE(trial);
    const FeatureMatrix fx(c.x, c.kinds);
    const DecisionTree t = fit_tree(fx, std::span<const double>(c.y), params(101, c.min_leaf));
    const oracle::RootSplit o = oracle::best_root_split(c.x, c.kinds, c.y, c.min_leaf);
    const double total = oracle::sse(c.y);
    const bool oracle_splits = o.gain > 1e-12 * total && std::isfinite(o.gain);
    if (!oracle_splits) {
      CHECK(t.nodes().empty());
      continue;
    }
    ++split_cases;
    REQUIRE_FALSE(t.nodes().empty());
    CHECK(t.nodes()[0].gain == doctest::Approx(o.gain).epsilon(1e-9));
  }
  CHECK(split_cases > 150);
}

TEST_CASE("mean-sorted categorical prefixes find the best subset partition") {
  Rng rng(99);
  std::uniform_int_distribution<int> code(0, 4);
  std::normal_distribution<double> z;
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 40;
    Eigen::MatrixXd x(n, 1);
    std::vector<int> codes(n);
    std::vector<double> y(n);
    const double shift[5] = {z(rng), z(rng), z(rng), z(rng), z(rng)};
    for (int i = 0; i < n; ++i) {
      codes[i] = i < 5 ? i : code(rng);
      x(i, 0) = codes[i];
      y[i] = shift[codes[i]] + 0.3 * z(rng);
    }
    const FeatureMatrix fx(x, {FeatureKind::categorical});
    const DecisionTree t = fit_tree(fx, std::span<const double>(y), params(2, 1));
    REQUIRE(t.nodes().size() == 1);
    CHECK(t.nodes()[0].gain ==
          doctest::Approx(oracle::best_subset_gain(codes, y, 5, 1)).epsilon(1e-9));
  }
}

TEST_CASE("structural invariants on random data") {
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const RandomCase c = random_case(rng);
    const FeatureMatrix fx(c.x, c.kinds);
    std::uniform_int_distribution<int> leaves(2, 12);
    const TreeParams p = params(leaves(rng), c.min_leaf);
    const DecisionTree t = fit_tree(fx, std::span<const double>(c.y), p);
    CHECK(t.num_leaves() <= p.num_leaves);
    CHECK(static_cast<int>(t.nodes().size()) == t.num_leaves() - 1);
    for (double v : t.leaf_values()) CHECK(std::isfinite(v));
    const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(c.y.data(), c.y.size());
    const double base = (y.array() - y.mean()).square().sum();
    const double fitted = train_sse(t, fx, y);
    CHECK(fitted <= base + 1e-9);
    if (t.num_leaves() > 1) CHECK(fitted < base);
    // Every leaf holds at least min_samples_leaf training rows.
    const Eigen::VectorXi idx = t.leaf_indices(fx);
    std::vector<int> counts(t.num_leaves(), 0);
    for (int i = 0; i < idx.size(); ++i) ++counts[idx(i)];
    for (int k : counts) CHECK(k >= std::min<int>(c.min_leaf, idx.size()));
    // Importance sums to the total SSE reduction.
    CHECK(gain_importance(t).sum() == doctest::Approx(base - fitted).epsilon(1e-8));
  }
}

TEST_CASE("permuting categorical codes leaves predictions unchanged") {
  Rng rng(23);
  std::uniform_int_distribution<int> code(0, 5);
  std::normal_distribution<double> z;
  const int n = 200;
  Eigen::MatrixXd x(n, 2), xp(n, 2);
  Eigen::VectorXd y(n);
  const int perm[6] = {3, 5, 0, 4, 1, 2};
  for (int i = 0; i < n; ++i) {
    const int c = code(rng);
    x(i, 0) = c;
    xp(i, 0) = perm[c];
    x(i, 1) = xp(i, 1) = z(rng);
    y(i) = c * 0.7 - (c % 2) * 2.0 + x(i, 1) + 0.1 * z(rng);
  }
  const std::vector<FeatureKind> kinds{FeatureKind::categorical, FeatureKind::numeric};
  const FeatureMatrix a(x, kinds), b(xp, kinds);
  const DecisionTree ta = fit_tree(a, y, params(12, 5));
  const DecisionTree tb = fit_tree(b, y, params(12, 5));
  CHECK(ta.predict(a) == tb.predict(b));
}

TEST_CASE("pure-noise feature gets little importance") {
  Rng rng(31);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> z;
  const int n = 2000;
  Eigen::MatrixXd x(n, 2);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = u(rng);
    x(i, 1) = u(rng);
    y(i) = 4.0 * x(i, 0) + 0.1 * z(rng);
  }
  const Eigen::VectorXd imp = gain_importance(fit_tree(numeric(x), y, params(16, 20)));
  CHECK(imp(1) < 0.05 * imp(0));
}

TEST_CASE("high-cardinality categorical columns are not split natively") {
  const int n = 400;
  Eigen::MatrixXd x(n, 1);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = i % 300;
    y(i) = i % 2;
  }
  TreeParams p = params(8, 1);
  p.max_categorical_cardinality = 256;
  CHECK(fit_tree(FeatureMatrix(x, {FeatureKind::categorical}), y, p).num_leaves() == 1);
  p.max_categorical_cardinality = 300;
  CHECK(fit_tree(FeatureMatrix(x, {FeatureKind::categorical}), y, p).num_leaves() > 1);
}

TEST_CASE("fit_tree is deterministic and leaf count capped") {
  Rng rng(41);
  std::normal_distribution<double> z;
  Eigen::MatrixXd x(500, 3);
  for (int i = 0; i < x.size(); ++i) x.data()[i] = z(rng);
  Eigen::VectorXd y = x.col(0).array().sin() + x.col(1).array() * x.col(2).array();
  const FeatureMatrix fx = numeric(x);
  const DecisionTree a = fit_tree(fx, y, params(31, 5));
  const DecisionTree b = fit_tree(fx, y, params(31, 5));
  CHECK(a == b);
  CHECK(a.num_leaves() == 31);
  CHECK(a.predict(fx) == b.predict(fx));
  CHECK(a.predict_dense(x) == a.predict(fx));
}

TEST_CASE("learning rate scales leaf values") {
  Eigen::MatrixXd x(40, 1);
  Eigen::VectorXd y(40);
  for (int i = 0; i < 40; ++i) {
    x(i, 0) = i;
    y(i) = i < 20 ? 2.0 : 6.0;
  }
  TreeParams p = params(2, 1);
  p.learning_rate = 0.5;
  const DecisionTree t = fit_tree(numeric(x), y, p);
  std::vector<double> v = t.leaf_values();
  std::sort(v.begin(), v.end());
  CHECK(v[0] == 1.0);
  CHECK(v[1] == 3.0);
}

TEST_CASE("invalid inputs") {
  TreeParams p;
  p.num_leaves = 1;
  CHECK_THROWS_AS(p.validate(), InvalidArgument);
  p = {};
  p.learning_rate = 0.0;
  CHECK_THROWS_AS(p.validate(), InvalidArgument);
  Eigen::MatrixXd x(0, 1);
  CHECK_THROWS_AS(fit_tree(numeric(x), Eigen::VectorXd(0), TreeParams{}), InvalidArgument);
  Eigen::MatrixXd x2(2, 1);
  x2 << 1, 2;
  Eigen::VectorXd bad(2);
  bad << 1, std::nan("");
  CHECK_THROWS_AS(fit_tree(numeric(x2), bad, TreeParams{}), InvalidArgument);
}
