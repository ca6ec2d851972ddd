#include "dbt/generators.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "dbt/errors.hpp"
#include "dbt/random.hpp"

namespace dbt {

ToyTask toy_task_from_string(const std::string& name) {
  if (name == "a") return ToyTask::a;
  if (name == "b") return ToyTask::b;
  if (name == "c") return ToyTask::c;
  if (name == "d") return ToyTask::d;
  if (name == "e") return ToyTask::e;
  throw InvalidArgument("unknown toy task '" + name + "' (expected a-e)");
}

std::string to_string(ToyTask task) {
  return std::string(1, static_cast<char>('a' + static_cast<int>(task)));
}

int toy_segment(double x) {
  if (x < 1.0) return 0;
  if (x < 2.0) return 1;
  return 2;
}

double toy_mean(ToyTask task, double x) {
  const int seg = toy_segment(x);
  switch (task) {
    case ToyTask::a:
      if (seg == 0) return 1.5 * x;
      if (seg == 1) return 1.5 * x + 3.0;
      return 1.5 * x - 4.0;
    case ToyTask::d:
      if (seg == 0) return 1.5 * std::sin(2.0 * std::numbers::pi * x);
      if (seg == 1) return 2.0;
      return 4.0 * (x - 2.5) * (x - 2.5) - 1.0;
    case ToyTask::e:
      return x;
    case ToyTask::b:
    case ToyTask::c: {
      const auto [lo0, lo1] = toy_box_lows(x);
      return 0.5 * (lo0 + lo1) + 0.5;
    }
  }
  return 0.0;
}

double toy_noise_sd(ToyTask task, double x) {
  switch (task) {
    case ToyTask::a: return kToyANoise;
    case ToyTask::d: return 0.2;
    case ToyTask::e: return 0.1 + 0.3 * x;
    default: throw InvalidArgument("bimodal toy tasks have no Gaussian noise");
  }
}

std::pair<double, double> toy_box_lows(double x) {
  switch (toy_segment(x)) {
    case 0: return {0.0, 3.0};
    case 1: return {1.0, 5.0};
    default: return {-2.0, 2.0};
  }
}

Dataset toy_generate(ToyTask task, int n, std::uint64_t seed) {
  if (n < 1) throw InvalidArgument("toy generator needs n >= 1");
  const int rows = task == ToyTask::c ? std::max(1, n / 5) : n;
  Rng rng = make_rng(seed, 0x70e0 + static_cast<std::uint64_t>(task));
  std::uniform_real_distribution<double> ux(0.0, kToyXMax);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> normal;

  Dataset data;
  data.name = "toy_" + to_string(task);
  data.schema.columns = {ColumnSpec{"x", FeatureKind::numeric, {}}};
  data.schema.response_name = "y";
  data.cells.resize(rows, 1);
  data.response.resize(rows);
  for (int i = 0; i < rows; ++i) {
    const double x = ux(rng);
    double y;
    if (task == ToyTask::b || task == ToyTask::c) {
      const auto [lo0, lo1] = toy_box_lows(x);
      const double lo = u01(rng) < 0.5 ? lo0 : lo1;
      y = lo + u01(rng);
    } else {
      y = toy_mean(task, x) + toy_noise_sd(task, x) * normal(rng);
    }
    data.cells(i, 0) = x;
    data.response(i) = y;
  }
  return data;
}

bool clf_toy_noisy_region(double x1) { return x1 >= 1.0; }

double clf_toy_bayes_accuracy(const ClfToyParams& p, bool noisy_region) {
  if (!noisy_region) return 1.0;
  const double r = p.positive_rate, e = p.noise_error;
  // Upper half of x2 holds r(1-e) positives and (1-r)e negatives; the lower
  // half the reverse. The Bayes rule takes the majority in each half.
  return std::max(r * (1 - e), (1 - r) * e) + std::max(r * e, (1 - r) * (1 - e));
}

Dataset clf_toy_generate(int n, std::uint64_t seed, const ClfToyParams& params) {
  if (n < 2) throw InvalidArgument("classification toy needs n >= 2");
  if (!(params.noise_error >= 0.0 && params.noise_error <= 0.5))
    throw InvalidArgument("noise_error must lie in [0, 0.5]");
  if (!(params.positive_rate > 0.0 && params.positive_rate < 1.0))
    throw InvalidArgument("positive_rate must lie in (0, 1)");
  Rng rng = make_rng(seed, 0xc1f);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  Dataset data;
  data.name = "clf_toy";
  data.schema.columns = {ColumnSpec{"x1", FeatureKind::numeric, {}},
                         ColumnSpec{"x2", FeatureKind::numeric, {}}};
  data.schema.response_name = "label";
  data.cells.resize(n, 2);
  data.response.resize(n);
  for (int i = 0; i < n; ++i) {
    const bool label = u01(rng) < params.positive_rate;
    const double x1 = 2.0 * u01(rng);
    bool upper = label;
    if (clf_toy_noisy_region(x1) && u01(rng) < params.noise_error) upper = !upper;
    const double x2 = (upper ? 0.5 : 0.0) + 0.5 * u01(rng);
    data.cells(i, 0) = x1;
    data.cells(i, 1) = x2;
    data.response(i) = label ? 1.0 : 0.0;
  }
  return data;
}

}  // namespace dbt
