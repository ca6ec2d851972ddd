#include <doctest.h>

#include <cmath>
#include <set>

#include "dbt/errors.hpp"
#include "dbt/generators.hpp"
#include "dbt/dataset.hpp"

using namespace dbt;

namespace {

Dataset grid(int n) {
  Dataset d;
  d.schema.columns = {{"x", FeatureKind::numeric, {}}};
  d.cells.resize(n, 1);
  d.response.resize(n);
  for (int i = 0; i < n; ++i) {
    d.cells(i, 0) = i;
    d.response(i) = 2.0 * i;
  }
  return d;
}

}  // namespace

TEST_CASE("csv type inference and missing cells") {
  const Dataset d = parse_csv("num,cat,y\n1.0,a,1\n2.5,b,2\nNA,a,3\n,\"b\",4\n");
  REQUIRE(d.features() == 2);
  CHECK(d.schema.columns[0].kind == FeatureKind::numeric);
  CHECK(d.schema.columns[1].kind == FeatureKind::categorical);
  CHECK(d.schema.columns[1].categories == std::vector<std::string>{"a", "b"});
  CHECK(d.cells(0, 0) == 1.0);
  CHECK(d.cells(1, 0) == 2.5);
  CHECK(d.missing(2, 0));
  CHECK(d.missing(3, 0));
  CHECK(d.cells(2, 1) == 0.0);
  CHECK(d.cells(3, 1) == 1.0);
  CHECK(d.response == Eigen::Vector4d(1, 2, 3, 4));
  CHECK(d.schema.response_name == "y");
}

TEST_CASE("csv options") {
  CsvOptions o;
  o.delimiter = ';';
  o.missing_sentinel = "?";
  o.response_column = "target";
  const Dataset d = parse_csv("target;x\n1;?\n0;\"3;5\"\n", o);
  CHECK(d.schema.response_name == "target");
  CHECK(d.schema.columns[0].kind == FeatureKind::categorical);
  CHECK(d.missing(0, 0));

  o = {};
  o.has_response = false;
  const Dataset u = parse_csv("a,b\n1,2\n", o);
  CHECK(u.features() == 2);
  CHECK_FALSE(u.labeled());
}

TEST_CASE("csv errors") {
  CHECK_THROWS_AS(parse_csv(""), DataError);
  CHECK_THROWS_AS(parse_csv("a,y\n1,2\n3\n"), DataError);
  try {
    parse_csv("a,y\n1,2\n3,oops\n");
    FAIL("expected an error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("row 2") != std::string::npos);
  }
  CsvOptions clf;
  clf.task = TaskKind::classification;
  CHECK_THROWS_AS(parse_csv("a,y\n1,2\n", clf), DataError);
  CHECK(parse_csv("a,y\n1,1\n2,0\n", clf).response == Eigen::Vector2d(1, 0));
  CHECK_THROWS_AS(parse_csv("a,y\n1,2\n\"x,3\n"), DataError);
  CHECK_THROWS_AS(load_csv("/nonexistent/file.csv"), DataError);
}

TEST_CASE("csv round trip") {
  const std::string text = "n,c,y\n1.5,\"x,y\",0.25\nNA,z,-3\n1e-300,\"x,y\",7\n";
  const Dataset d = parse_csv(text);
  const Dataset back = parse_csv(format_csv(d));
  CHECK(back == d);
  const Schema s = parse_schema(format_schema(d.schema));
  CHECK(s == d.schema);
}

TEST_CASE("schema-typed loading maps unseen categories") {
  const Dataset train = parse_csv("c,y\na,1\nb,2\n");
  CsvOptions o;
  o.has_response = false;
  const Dataset test = parse_csv("c\nb\nzz\nNA\n", o, &train.schema);
  CHECK(test.cells(0, 0) == 1.0);
  CHECK(test.cells(1, 0) == -1.0);
  CHECK(test.missing(2, 0));
  CHECK_THROWS_AS(parse_csv("other\nb\n", o, &train.schema), DataError);
}

TEST_CASE("make_split is deterministic and partitions rows") {
  const Dataset d = grid(506);
  SplitSpec spec;
  spec.fold_seed = 7;
  spec.fold_index = 3;
  const Split a = make_split(d, spec), b = make_split(d, spec);
  CHECK(a.train.rows() == 455);
  CHECK(a.test.rows() == 51);
  CHECK(a.train_rows == b.train_rows);
  std::set<Eigen::Index> all(a.train_rows.begin(), a.train_rows.end());
  all.insert(a.test_rows.begin(), a.test_rows.end());
  CHECK(all.size() == 506);
  for (std::size_t i = 0; i < a.test_rows.size(); ++i)
    CHECK(a.test.cells(i, 0) == static_cast<double>(a.test_rows[i]));

  spec.fold_index = 4;
  const Split c = make_split(d, spec);
  CHECK(c.test_rows != a.test_rows);
  spec.train_fraction = 1.0;
  CHECK_THROWS_AS(make_split(d, spec), InvalidArgument);
}

TEST_CASE("standardize uses train statistics only") {
  Dataset train = parse_csv("n,k,c,y\n1,5,a,10\n3,5,b,20\nNA,5,a,30\n");
  Dataset test = parse_csv("n,k,c,y\n100,5,b,40\n", {}, &train.schema);
  const StandardizedSplit s = standardize(train, test, TaskKind::regression);
  CHECK(s.train.cells(0, 0) == doctest::Approx(-1.0));
  CHECK(s.train.cells(1, 0) == doctest::Approx(1.0));
  CHECK(s.train.missing(2, 0));
  CHECK(s.test.cells(0, 0) == doctest::Approx((100.0 - 2.0) / 1.0));
  CHECK(s.train.cells.col(1).isZero());  // constant column
  CHECK(s.train.cells(1, 2) == 1.0);     // categorical untouched
  CHECK(s.train.response.mean() == doctest::Approx(0.0).epsilon(1e-12));
  const Eigen::VectorXd back = s.transform.invert_response(s.test.response);
  CHECK(std::abs(back(0) - 40.0) < 1e-10);
  CHECK(s.transform.invert_response(s.train.response).isApprox(train.response, 1e-12));

  CsvOptions clf;
  clf.task = TaskKind::classification;
  const Dataset c = parse_csv("n,y\n1,0\n2,1\n", clf);
  CHECK_FALSE(fit_standardization(c, TaskKind::classification).response.has_value());
}

TEST_CASE("mcar mask") {
  Dataset d;
  d.schema.columns.resize(100);
  for (auto& c : d.schema.columns) c.name = "f";
  d.cells = Eigen::MatrixXd::Ones(10000, 100);
  d.response = Eigen::VectorXd::Ones(10000);
  const Dataset m = mcar_mask(d, 0.1, 42);
  const double frac = m.cells.array().isNaN().cast<double>().mean();
  CHECK(std::abs(frac - 0.1) < 0.001);
  CHECK(m.response == d.response);
  CHECK(mcar_mask(d, 0.1, 42) == m);
  CHECK_FALSE(mcar_mask(d, 0.1, 43) == m);
  CHECK(mcar_mask(d, 0.0, 42) == d);
  CHECK_THROWS_AS(mcar_mask(d, 1.0, 1), InvalidArgument);
}

TEST_CASE("toy task a stays near its segment lines") {
  const Dataset d = toy_generate(ToyTask::a, 20000, 1);
  int inside = 0, close = 0;
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    const double x = d.cells(i, 0);
    if (std::abs(x - std::round(x)) < 0.05) continue;
    ++inside;
    close += std::abs(d.response(i) - toy_mean(ToyTask::a, x)) <= 4 * kToyANoise;
  }
  CHECK(close > 0.999 * inside);
  CHECK(toy_generate(ToyTask::a, 50, 9) == toy_generate(ToyTask::a, 50, 9));
}

TEST_CASE("toy task b is bimodal in every segment") {
  const Dataset d = toy_generate(ToyTask::b, 6000, 2);
  int lower[3] = {}, total[3] = {};
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    const double x = d.cells(i, 0);
    const int seg = toy_segment(x);
    const auto [lo0, lo1] = toy_box_lows(x);
    const double y = d.response(i);
    const bool in0 = y >= lo0 && y <= lo0 + 1, in1 = y >= lo1 && y <= lo1 + 1;
    REQUIRE((in0 || in1));
    ++total[seg];
    lower[seg] += in0;
  }
  for (int s = 0; s < 3; ++s) {
    const double f = lower[s] / double(total[s]);
    CHECK(f > 0.4);
    CHECK(f < 0.6);
  }
  CHECK(toy_generate(ToyTask::c, 6000, 2).rows() == 1200);
}

TEST_CASE("toy tasks d and e") {
  const Dataset e = toy_generate(ToyTask::e, 20000, 3);
  double lo = 0, hi = 0;
  int nlo = 0, nhi = 0;
  for (Eigen::Index i = 0; i < e.rows(); ++i) {
    const double x = e.cells(i, 0), r = e.response(i) - x;
    if (x < 0.5) { lo += r * r; ++nlo; }
    if (x > 2.5) { hi += r * r; ++nhi; }
  }
  CHECK(std::sqrt(hi / nhi) > 2.5 * std::sqrt(lo / nlo));
  const Dataset d = toy_generate(ToyTask::d, 5000, 4);
  double sse = 0;
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    const double r = d.response(i) - toy_mean(ToyTask::d, d.cells(i, 0));
    sse += r * r;
  }
  CHECK(std::sqrt(sse / d.rows()) == doctest::Approx(0.2).epsilon(0.05));
}

TEST_CASE("classification toy") {
  ClfToyParams p;
  const Dataset d = clf_toy_generate(40000, 5, p);
  int clean = 0, clean_ok = 0, noisy = 0, noisy_ok = 0, pos = 0;
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    const double x1 = d.cells(i, 0), x2 = d.cells(i, 1);
    const int label = static_cast<int>(d.response(i));
    const int bayes = x2 >= 0.5 ? 1 : 0;
    pos += label;
    if (clf_toy_noisy_region(x1)) {
      ++noisy;
      noisy_ok += bayes == label;
    } else {
      ++clean;
      clean_ok += bayes == label;
    }
  }
  CHECK(clean_ok == clean);
  CHECK(clf_toy_bayes_accuracy(p, false) == 1.0);
  CHECK(noisy_ok / double(noisy) ==
        doctest::Approx(clf_toy_bayes_accuracy(p, true)).epsilon(0.02));
  CHECK(std::abs(pos / double(d.rows()) - p.positive_rate) < 0.01);
}
