#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace dbt {

using SampleMatrix = Eigen::MatrixXd;  // rows x samples

// Linear interpolation between closest ranks; q in [0, 100].
double percentile(std::vector<double> values, double q);

// Point prediction is the per-row sample mean.
double rmse(const Eigen::Ref<const Eigen::VectorXd>& truth,
            const Eigen::Ref<const SampleMatrix>& samples);

inline constexpr double kNllStdFloor = 1e-6;

// Mean over rows of the Gaussian NLL under a per-row fit (sample mean,
// unbiased sample std floored at kNllStdFloor) to the generated samples.
double nll(const Eigen::Ref<const Eigen::VectorXd>& truth,
           const Eigen::Ref<const SampleMatrix>& samples);

// Quantile interval coverage error in percent. Truths below the lowest or
// above the highest sample count toward the first or last bin.
double qice(const Eigen::Ref<const Eigen::VectorXd>& truth,
            const Eigen::Ref<const SampleMatrix>& samples, int n_bins = 10);

// Width between the lo and hi percentiles of each row.
Eigen::VectorXd piw(const Eigen::Ref<const SampleMatrix>& samples, double lo = 2.5,
                    double hi = 97.5);

struct TTest {
  bool reject = false;
  double t_stat = 0.0;
  double p_value = 1.0;
};

// Paired test of {p1} against {1 - p1}: differences d = 2 p1 - 1, Student t
// with S - 1 degrees of freedom, two-sided. With zero spread in d the test
// rejects iff mean(d) != 0.
TTest paired_t_test(const Eigen::Ref<const Eigen::VectorXd>& probs1, double alpha);
std::vector<TTest> paired_t_tests(const Eigen::Ref<const Eigen::MatrixXd>& probs1,
                                  double alpha);

double accuracy(const Eigen::Ref<const Eigen::VectorXi>& truth,
                const Eigen::Ref<const Eigen::VectorXi>& predicted);

struct AccuracyCell {
  std::size_t count = 0;
  std::size_t correct = 0;
  double piw_sum = 0.0;

  std::optional<double> accuracy() const {
    if (count == 0) return std::nullopt;
    return static_cast<double>(correct) / static_cast<double>(count);
  }
  std::optional<double> mean_piw() const {
    if (count == 0) return std::nullopt;
    return piw_sum / static_cast<double>(count);
  }
  void add(bool is_correct, double width) {
    ++count;
    correct += is_correct ? 1 : 0;
    piw_sum += width;
  }
};

struct DeferralReport {
  struct ClassRow {
    int predicted_class = 0;
    AccuracyCell all, correct, incorrect;
  };
  struct PiwBin {
    double lower = 0.0;  // inclusive range of PIW values in the bin
    double upper = 0.0;
    AccuracyCell cell;
  };
  struct ClassTest {
    int predicted_class = 0;
    AccuracyCell all, reject, fail;
    std::optional<double> reject_rate() const {
      if (all.count == 0) return std::nullopt;
      return static_cast<double>(reject.count) / static_cast<double>(all.count);
    }
  };
  struct AlphaRow {
    double alpha = 0.05;
    AccuracyCell reject, fail;
    std::vector<ClassTest> by_class;
    // Overall accuracy if every fail-to-reject case is deferred to a reviewer
    // who matches the rejected-subset accuracy of its predicted class.
    double blended_accuracy = 0.0;
  };

  AccuracyCell overall;
  std::vector<ClassRow> by_class;  // predicted class x correctness
  bool piw_bins_distinct = true;   // false when quartile bins were used
  std::vector<PiwBin> piw_bins;
  std::vector<AlphaRow> alphas;

  std::string to_text() const;
  std::string to_csv() const;
};

inline constexpr std::size_t kMaxDistinctPiwBins = 16;

// tests[a][j] is row j's t-test at alphas[a].
DeferralReport deferral_report(const Eigen::Ref<const Eigen::VectorXi>& truth,
                               const Eigen::Ref<const Eigen::VectorXi>& predicted,
                               const Eigen::Ref<const Eigen::VectorXd>& piws,
                               const std::vector<double>& alphas,
                               const std::vector<std::vector<TTest>>& tests);

struct Summary {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation across folds
};
Summary summarize(const std::vector<double>& values);
std::string format_summary(const Summary& s, int precision = 2);

}  // namespace dbt
