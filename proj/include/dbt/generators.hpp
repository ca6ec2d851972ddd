#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include "dbt/dataset.hpp"

namespace dbt {

// Synthetic one-dimensional regression tasks with x ~ U(0, 3), split into
// three unit-width segments.
//   a: piecewise linear with disjoint offsets, N(0, 0.3^2) noise
//   b: each segment bimodal, y uniform on one of two boxes
//   c: task b with n / 5 rows
//   d: sine, constant, and quadratic segments, N(0, 0.2^2) noise
//   e: linear with noise sd growing linearly in x
enum class ToyTask : std::uint8_t { a, b, c, d, e };

ToyTask toy_task_from_string(const std::string& name);
std::string to_string(ToyTask task);

Dataset toy_generate(ToyTask task, int n, std::uint64_t seed);

inline constexpr double kToyXMax = 3.0;
inline constexpr double kToyANoise = 0.3;

int toy_segment(double x);
// Conditional mean of y given x (tasks a, d, e) and conditional noise sd.
double toy_mean(ToyTask task, double x);
double toy_noise_sd(ToyTask task, double x);
// Bimodal tasks: the two boxes [lo, lo + 1] of the segment containing x.
std::pair<double, double> toy_box_lows(double x);

struct ClfToyParams {
  // Bayes error inside the noisy region.
  double noise_error = 0.25;
  double positive_rate = 0.5;
};

// Binary task on features (x1, x2). x1 ~ U(0, 2) selects the region:
// x1 < 1 is cleanly separable by x2 >= 0.5, x1 >= 1 has x2 drawn from the
// wrong half with probability noise_error.
Dataset clf_toy_generate(int n, std::uint64_t seed, const ClfToyParams& params = {});
bool clf_toy_noisy_region(double x1);
double clf_toy_bayes_accuracy(const ClfToyParams& params, bool noisy_region);

}  // namespace dbt
