#include "dbt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <set>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>

#include "dbt/errors.hpp"

namespace dbt {

namespace {

void check_rows(const Eigen::Ref<const Eigen::VectorXd>& truth,
                const Eigen::Ref<const SampleMatrix>& samples) {
  if (truth.size() != samples.rows())
    throw InvalidArgument("truth has " + std::to_string(truth.size()) +
                          " rows, samples have " + std::to_string(samples.rows()));
  if (samples.cols() < 1) throw InvalidArgument("need at least one sample per row");
}

std::vector<double> row_values(const Eigen::Ref<const SampleMatrix>& m, Eigen::Index j) {
  std::vector<double> v(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index s = 0; s < m.cols(); ++s) v[s] = m(j, s);
  return v;
}

double sorted_percentile(const std::vector<double>& sorted, double q) {
  const double pos = q / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

std::string pct(const std::optional<double>& v) {
  if (!v) return "n/a";
  std::ostringstream s;
  s << std::fixed << std::setprecision(2) << 100.0 * *v << '%';
  return s.str();
}

std::string num(const std::optional<double>& v, int precision = 4) {
  if (!v) return "n/a";
  std::ostringstream s;
  s << std::fixed << std::setprecision(precision) << *v;
  return s.str();
}

std::string csv_num(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream s;
  s << std::setprecision(10) << *v;
  return s.str();
}

}  // namespace

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw InvalidArgument("percentile of an empty set");
  if (!(q >= 0.0 && q <= 100.0)) throw InvalidArgument("percentile level must lie in [0, 100]");
  std::sort(values.begin(), values.end());
  return sorted_percentile(values, q);
}

double rmse(const Eigen::Ref<const Eigen::VectorXd>& truth,
            const Eigen::Ref<const SampleMatrix>& samples) {
  check_rows(truth, samples);
  const Eigen::VectorXd point = samples.rowwise().mean();
  return std::sqrt((point - truth).squaredNorm() / static_cast<double>(truth.size()));
}

double nll(const Eigen::Ref<const Eigen::VectorXd>& truth,
           const Eigen::Ref<const SampleMatrix>& samples) {
  check_rows(truth, samples);
  if (samples.cols() < 2) throw InvalidArgument("NLL needs at least two samples per row");
  const double S = static_cast<double>(samples.cols());
  double total = 0.0;
  for (Eigen::Index j = 0; j < samples.rows(); ++j) {
    const double mean = samples.row(j).mean();
    const double var = (samples.row(j).array() - mean).square().sum() / (S - 1.0);
    const double sd = std::max(std::sqrt(var), kNllStdFloor);
    const double z = (truth(j) - mean) / sd;
    total += 0.5 * std::log(2.0 * std::numbers::pi * sd * sd) + 0.5 * z * z;
  }
  return total / static_cast<double>(samples.rows());
}

double qice(const Eigen::Ref<const Eigen::VectorXd>& truth,
            const Eigen::Ref<const SampleMatrix>& samples, int n_bins) {
  check_rows(truth, samples);
  if (n_bins < 1) throw InvalidArgument("QICE needs n_bins >= 1");
  if (samples.cols() < n_bins)
    throw InvalidArgument("QICE needs at least n_bins samples per row");
  std::vector<double> counts(static_cast<std::size_t>(n_bins), 0.0);
  for (Eigen::Index j = 0; j < samples.rows(); ++j) {
    std::vector<double> v = row_values(samples, j);
    std::sort(v.begin(), v.end());
    // Bin index = number of quantile levels k / n_bins (k = 0..n_bins)
    // strictly below the truth, clamped into [1, n_bins].
    int below = 0;
    for (int k = 0; k <= n_bins; ++k)
      if (sorted_percentile(v, 100.0 * k / n_bins) < truth(j)) ++below;
    const int bin = std::clamp(below, 1, n_bins) - 1;
    counts[bin] += 1.0;
  }
  const double ideal = 1.0 / n_bins;
  double err = 0.0;
  for (double c : counts) err += std::abs(c / static_cast<double>(truth.size()) - ideal);
  return 100.0 * err / n_bins;
}

Eigen::VectorXd piw(const Eigen::Ref<const SampleMatrix>& samples, double lo, double hi) {
  if (!(lo >= 0.0 && lo < hi && hi <= 100.0))
    throw InvalidArgument("PIW needs 0 <= lo < hi <= 100");
  if (samples.cols() < 1) throw InvalidArgument("need at least one sample per row");
  Eigen::VectorXd out(samples.rows());
  for (Eigen::Index j = 0; j < samples.rows(); ++j) {
    std::vector<double> v = row_values(samples, j);
    std::sort(v.begin(), v.end());
    out(j) = sorted_percentile(v, hi) - sorted_percentile(v, lo);
  }
  return out;
}

TTest paired_t_test(const Eigen::Ref<const Eigen::VectorXd>& probs1, double alpha) {
  const Eigen::Index S = probs1.size();
  if (S < 2) throw InvalidArgument("t-test needs at least two samples");
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("alpha must lie in (0, 1)");
  const Eigen::VectorXd d = (2.0 * probs1.array() - 1.0).matrix();
  const double mean = d.mean();
  const double sd = std::sqrt((d.array() - mean).square().sum() / static_cast<double>(S - 1));
  TTest out;
  if (!(sd > 0.0)) {
    out.reject = mean != 0.0;
    out.t_stat = mean == 0.0 ? 0.0 : std::copysign(HUGE_VAL, mean);
    out.p_value = out.reject ? 0.0 : 1.0;
    return out;
  }
  out.t_stat = mean * std::sqrt(static_cast<double>(S)) / sd;
  const boost::math::students_t dist(static_cast<double>(S - 1));
  out.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(out.t_stat)));
  out.reject = out.p_value < alpha;
  return out;
}

std::vector<TTest> paired_t_tests(const Eigen::Ref<const Eigen::MatrixXd>& probs1,
                                  double alpha) {
  std::vector<TTest> out;
  out.reserve(static_cast<std::size_t>(probs1.rows()));
  for (Eigen::Index j = 0; j < probs1.rows(); ++j)
    out.push_back(paired_t_test(probs1.row(j).transpose(), alpha));
  return out;
}

double accuracy(const Eigen::Ref<const Eigen::VectorXi>& truth,
                const Eigen::Ref<const Eigen::VectorXi>& predicted) {
  if (truth.size() != predicted.size() || truth.size() == 0)
    throw InvalidArgument("accuracy needs aligned, non-empty label vectors");
  return static_cast<double>((truth.array() == predicted.array()).count()) /
         static_cast<double>(truth.size());
}

DeferralReport deferral_report(const Eigen::Ref<const Eigen::VectorXi>& truth,
                               const Eigen::Ref<const Eigen::VectorXi>& predicted,
                               const Eigen::Ref<const Eigen::VectorXd>& piws,
                               const std::vector<double>& alphas,
                               const std::vector<std::vector<TTest>>& tests) {
  const Eigen::Index n = truth.size();
  if (predicted.size() != n || piws.size() != n)
    throw InvalidArgument("deferral report inputs must be aligned");
  if (tests.size() != alphas.size())
    throw InvalidArgument("need one t-test vector per alpha");
  for (const auto& t : tests)
    if (static_cast<Eigen::Index>(t.size()) != n)
      throw InvalidArgument("t-test vector length does not match row count");

  DeferralReport r;
  r.by_class.resize(2);
  for (int c = 0; c < 2; ++c) r.by_class[c].predicted_class = c;
  for (Eigen::Index j = 0; j < n; ++j) {
    const bool ok = truth(j) == predicted(j);
    r.overall.add(ok, piws(j));
    auto& row = r.by_class[predicted(j) == 1 ? 1 : 0];
    row.all.add(ok, piws(j));
    (ok ? row.correct : row.incorrect).add(ok, piws(j));
  }

  // PIW bins: distinct widths when there are few, else quartiles.
  std::set<double> distinct(piws.data(), piws.data() + n);
  if (distinct.size() <= kMaxDistinctPiwBins) {
    r.piw_bins_distinct = true;
    for (double w : distinct) r.piw_bins.push_back({w, w, {}});
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto it = distinct.find(piws(j));
      r.piw_bins[static_cast<std::size_t>(std::distance(distinct.begin(), it))].cell.add(
          truth(j) == predicted(j), piws(j));
    }
  } else {
    r.piw_bins_distinct = false;
    std::vector<double> sorted(piws.data(), piws.data() + n);
    std::sort(sorted.begin(), sorted.end());
    const double edges[3] = {sorted_percentile(sorted, 25), sorted_percentile(sorted, 50),
                             sorted_percentile(sorted, 75)};
    r.piw_bins.resize(4);
    for (auto& b : r.piw_bins) {
      b.lower = HUGE_VAL;
      b.upper = -HUGE_VAL;
    }
    for (Eigen::Index j = 0; j < n; ++j) {
      int b = 0;
      while (b < 3 && piws(j) > edges[b]) ++b;
      auto& bin = r.piw_bins[b];
      bin.cell.add(truth(j) == predicted(j), piws(j));
      bin.lower = std::min(bin.lower, piws(j));
      bin.upper = std::max(bin.upper, piws(j));
    }
    std::erase_if(r.piw_bins, [](const auto& b) { return b.cell.count == 0; });
  }

  for (std::size_t a = 0; a < alphas.size(); ++a) {
    DeferralReport::AlphaRow row;
    row.alpha = alphas[a];
    row.by_class.resize(2);
    for (int c = 0; c < 2; ++c) row.by_class[c].predicted_class = c;
    for (Eigen::Index j = 0; j < n; ++j) {
      const bool ok = truth(j) == predicted(j);
      const bool rej = tests[a][j].reject;
      (rej ? row.reject : row.fail).add(ok, piws(j));
      auto& cls = row.by_class[predicted(j) == 1 ? 1 : 0];
      cls.all.add(ok, piws(j));
      (rej ? cls.reject : cls.fail).add(ok, piws(j));
    }
    double lifted = 0.0;
    for (const auto& cls : row.by_class) {
      if (cls.all.count == 0) continue;
      const double acc = cls.reject.count ? *cls.reject.accuracy() : *cls.all.accuracy();
      lifted += acc * static_cast<double>(cls.all.count);
    }
    row.blended_accuracy = n ? lifted / static_cast<double>(n) : 0.0;
    r.alphas.push_back(std::move(row));
  }
  return r;
}

std::string DeferralReport::to_text() const {
  std::ostringstream o;
  o << "overall accuracy: " << pct(overall.accuracy()) << " (" << overall.count << ")\n\n";
  o << "PIW by predicted class\n";
  o << std::left << std::setw(10) << "class" << std::setw(12) << "accuracy" << std::setw(22)
    << "mean PIW (count)" << std::setw(22) << "correct (count)" << "incorrect (count)\n";
  for (const auto& c : by_class) {
    auto cell = [](const AccuracyCell& x) {
      return num(x.mean_piw(), 2) + " (" + std::to_string(x.count) + ")";
    };
    o << std::setw(10) << c.predicted_class << std::setw(12) << pct(c.all.accuracy())
      << std::setw(22) << cell(c.all) << std::setw(22) << cell(c.correct) << cell(c.incorrect)
      << '\n';
  }
  o << "\nAccuracy by PIW bin (" << (piw_bins_distinct ? "distinct widths" : "quartiles")
    << ")\n";
  o << std::setw(6) << "bin" << std::setw(14) << "mean PIW" << "accuracy (count)\n";
  for (std::size_t b = 0; b < piw_bins.size(); ++b)
    o << std::setw(6) << b + 1 << std::setw(14) << num(piw_bins[b].cell.mean_piw(), 4)
      << pct(piw_bins[b].cell.accuracy()) << " (" << piw_bins[b].cell.count << ")\n";
  for (const auto& a : alphas) {
    o << "\nt-test at alpha = " << a.alpha << '\n';
    o << "  reject:         " << pct(a.reject.accuracy()) << " (" << a.reject.count << ")\n";
    o << "  fail to reject: " << pct(a.fail.accuracy()) << " (" << a.fail.count << ")\n";
    for (const auto& c : a.by_class)
      o << "  class " << c.predicted_class << ": accuracy " << pct(c.all.accuracy())
        << ", reject rate " << pct(c.reject_rate()) << ", reject " << pct(c.reject.accuracy())
        << " (" << c.reject.count << "), fail " << pct(c.fail.accuracy()) << " ("
        << c.fail.count << ")\n";
    o << "  accuracy with deferral: " << pct(a.blended_accuracy) << '\n';
  }
  return o.str();
}

std::string DeferralReport::to_csv() const {
  std::ostringstream o;
  o << "table,key,subset,count,accuracy,mean_piw\n";
  auto line = [&](const std::string& table, const std::string& key, const std::string& subset,
                  const AccuracyCell& c) {
    o << table << ',' << key << ',' << subset << ',' << c.count << ',' << csv_num(c.accuracy())
      << ',' << csv_num(c.mean_piw()) << '\n';
  };
  line("overall", "", "all", overall);
  for (const auto& c : by_class) {
    const std::string k = "class=" + std::to_string(c.predicted_class);
    line("piw_by_class", k, "all", c.all);
    line("piw_by_class", k, "correct", c.correct);
    line("piw_by_class", k, "incorrect", c.incorrect);
  }
  for (std::size_t b = 0; b < piw_bins.size(); ++b)
    line("piw_bins", "bin=" + std::to_string(b + 1), "all", piw_bins[b].cell);
  for (const auto& a : alphas) {
    std::ostringstream k;
    k << "alpha=" << a.alpha;
    line("ttest", k.str(), "reject", a.reject);
    line("ttest", k.str(), "fail", a.fail);
    for (const auto& c : a.by_class) {
      const std::string ck = k.str() + ";class=" + std::to_string(c.predicted_class);
      line("ttest_by_class", ck, "reject", c.reject);
      line("ttest_by_class", ck, "fail", c.fail);
    }
    o << "deferral," << k.str() << ",blended," << overall.count << ','
      << csv_num(a.blended_accuracy) << ",\n";
  }
  return o.str();
}

Summary summarize(const std::vector<double>& values) {
  if (values.empty()) return {};
  const double n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / n)};
}

std::string format_summary(const Summary& s, int precision) {
  std::ostringstream o;
  o << std::fixed << std::setprecision(precision) << s.mean << " ± " << s.std;
  return o.str();
}

}  // namespace dbt
