#pragma once

// Closed-form quantities of the conditional diffusion process.
//
// The forward process mixes the response toward a prior mean mu_T:
//   q(y_t | y_0, x) = N(sqrt(abar_t) y_0 + (1 - sqrt(abar_t)) mu_T, (1 - abar_t))
// and its posterior q(y_{t-1} | y_t, y_0, x) is Gaussian with variance
// tilde_beta_t and mean gamma0 y_0 + gamma1 y_t + gamma2 mu_T.
//
// All per-timestep arrays are indexed 1..T; index 0 holds the t = 0 boundary
// (alpha_bar[0] = 1) and is otherwise unused.

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "dbt/errors.hpp"

namespace dbt {

template <typename Scalar>
class BasicNoiseSchedule {
public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  static BasicNoiseSchedule linear(int timesteps, Scalar beta_start,
                                   Scalar beta_end) {
    if (timesteps < 2)
      throw InvalidArgument("noise schedule needs at least 2 timesteps");
    if (!(beta_start > Scalar(0)) || !(beta_start <= beta_end) ||
        !(beta_end < Scalar(1)))
      throw InvalidArgument(
          "noise schedule requires 0 < beta_start <= beta_end < 1");

    Vector beta(timesteps + 1);
    beta(0) = Scalar(0);
    const Scalar span = beta_end - beta_start;
    for (int t = 1; t <= timesteps; ++t)
      beta(t) = beta_start + span * Scalar(t - 1) / Scalar(timesteps - 1);
    beta(timesteps) = beta_end;
    return BasicNoiseSchedule(std::move(beta), beta_start, beta_end);
  }

  int timesteps() const { return static_cast<int>(beta_.size()) - 1; }
  Scalar beta_start() const { return beta_start_; }
  Scalar beta_end() const { return beta_end_; }

  Scalar beta(int t) const { return beta_(t); }
  Scalar alpha(int t) const { return alpha_(t); }
  Scalar alpha_bar(int t) const { return alpha_bar_(t); }
  Scalar sqrt_alpha_bar(int t) const { return sqrt_alpha_bar_(t); }
  Scalar sqrt_one_minus_alpha_bar(int t) const {
    return sqrt_one_minus_alpha_bar_(t);
  }
  Scalar tilde_beta(int t) const { return tilde_beta_(t); }
  Scalar gamma0(int t) const { return gamma0_(t); }
  Scalar gamma1(int t) const { return gamma1_(t); }
  Scalar gamma2(int t) const { return gamma2_(t); }

  const Vector& betas() const { return beta_; }
  const Vector& alpha_bars() const { return alpha_bar_; }

  void check_timestep(int t, int lowest = 1) const {
    if (t < lowest || t > timesteps())
      throw InvalidArgument("timestep " + std::to_string(t) +
                            " outside [" + std::to_string(lowest) + ", " +
                            std::to_string(timesteps()) + "]");
  }

private:
  BasicNoiseSchedule(Vector beta, Scalar beta_start, Scalar beta_end)
      : beta_(std::move(beta)), beta_start_(beta_start), beta_end_(beta_end) {
    using std::sqrt;
    const Eigen::Index n = beta_.size();
    alpha_ = Vector::Ones(n) - beta_;
    alpha_bar_.resize(n);
    alpha_bar_(0) = Scalar(1);
    for (Eigen::Index t = 1; t < n; ++t)
      alpha_bar_(t) = alpha_bar_(t - 1) * alpha_(t);
    sqrt_alpha_bar_ = alpha_bar_.cwiseSqrt();
    sqrt_one_minus_alpha_bar_ = (Vector::Ones(n) - alpha_bar_).cwiseSqrt();

    tilde_beta_ = Vector::Zero(n);
    gamma0_ = Vector::Zero(n);
    gamma1_ = Vector::Zero(n);
    gamma2_ = Vector::Zero(n);
    for (Eigen::Index t = 1; t < n; ++t) {
      const Scalar ab = alpha_bar_(t);
      const Scalar ab_prev = alpha_bar_(t - 1);
      const Scalar denom = Scalar(1) - ab;
      tilde_beta_(t) = (Scalar(1) - ab_prev) / denom * beta_(t);
      gamma0_(t) = beta_(t) * sqrt(ab_prev) / denom;
      gamma1_(t) = (Scalar(1) - ab_prev) * sqrt(alpha_(t)) / denom;
      gamma2_(t) = Scalar(1) + (sqrt(ab) - Scalar(1)) *
                                   (sqrt(alpha_(t)) + sqrt(ab_prev)) / denom;
    }
  }

  Vector beta_;
  Vector alpha_;
  Vector alpha_bar_;
  Vector sqrt_alpha_bar_;
  Vector sqrt_one_minus_alpha_bar_;
  Vector tilde_beta_;
  Vector gamma0_;
  Vector gamma1_;
  Vector gamma2_;
  Scalar beta_start_;
  Scalar beta_end_;
};

using NoiseSchedule = BasicNoiseSchedule<double>;

inline constexpr int kDefaultTimesteps = 1000;
inline constexpr double kDefaultBetaStart = 1e-4;
inline constexpr double kDefaultBetaEnd = 0.02;

inline NoiseSchedule default_schedule() {
  return NoiseSchedule::linear(kDefaultTimesteps, kDefaultBetaStart,
                               kDefaultBetaEnd);
}

// y_t = sqrt(abar_t) y0 + (1 - sqrt(abar_t)) mu_T + sqrt(1 - abar_t) eps
template <typename Scalar, typename D0, typename DMu, typename DEps>
auto forward_sample(const BasicNoiseSchedule<Scalar>& s,
                    const Eigen::MatrixBase<D0>& y0,
                    const Eigen::MatrixBase<DMu>& mu_T, int t,
                    const Eigen::MatrixBase<DEps>& eps) {
  s.check_timestep(t);
  const Scalar a = s.sqrt_alpha_bar(t);
  const Scalar b = s.sqrt_one_minus_alpha_bar(t);
  return (a * y0.derived() + (Scalar(1) - a) * mu_T.derived() +
          b * eps.derived())
      .eval();
}

template <typename Scalar, typename DYt, typename D0, typename DMu>
auto posterior_mean(const BasicNoiseSchedule<Scalar>& s,
                    const Eigen::MatrixBase<DYt>& y_t,
                    const Eigen::MatrixBase<D0>& y0_hat,
                    const Eigen::MatrixBase<DMu>& mu_T, int t) {
  s.check_timestep(t, 2);
  return (s.gamma0(t) * y0_hat.derived() + s.gamma1(t) * y_t.derived() +
          s.gamma2(t) * mu_T.derived())
      .eval();
}

// Draws y_{t-1} ~ N(mean, tilde_beta_t) elementwise.
template <typename Scalar, typename DMean, typename Rng>
auto posterior_sample(const BasicNoiseSchedule<Scalar>& s,
                      const Eigen::MatrixBase<DMean>& mean, int t, Rng& rng) {
  s.check_timestep(t, 2);
  using std::sqrt;
  const Scalar sd = sqrt(s.tilde_beta(t));
  std::normal_distribution<Scalar> normal;
  typename DMean::PlainObject out = mean.derived();
  for (Eigen::Index i = 0; i < out.size(); ++i)
    out(i) += sd * normal(rng);
  return out;
}

template <typename Scalar, typename DYt, typename DEps, typename DMu>
auto y0_from_noise(const BasicNoiseSchedule<Scalar>& s,
                   const Eigen::MatrixBase<DYt>& y_t,
                   const Eigen::MatrixBase<DEps>& eps_hat,
                   const Eigen::MatrixBase<DMu>& mu_T, int t) {
  s.check_timestep(t);
  const Scalar a = s.sqrt_alpha_bar(t);
  const Scalar b = s.sqrt_one_minus_alpha_bar(t);
  return ((y_t.derived() - (Scalar(1) - a) * mu_T.derived() -
           b * eps_hat.derived()) /
          a)
      .eval();
}

// Score of the forward marginal: grad_y log q(y_t | y0, x) = -eps / sqrt(1 - abar_t).
template <typename Scalar, typename DEps>
auto noise_to_score(const BasicNoiseSchedule<Scalar>& s,
                    const Eigen::MatrixBase<DEps>& eps, int t) {
  s.check_timestep(t);
  return (-eps.derived() / s.sqrt_one_minus_alpha_bar(t)).eval();
}

template <typename Scalar>
struct CoefficientRow {
  int t;
  Scalar gamma0;
  Scalar gamma1;
  Scalar gamma2;
  Scalar tilde_beta;
};

// One row per t = T..2, in sampling order.
template <typename Scalar>
std::vector<CoefficientRow<Scalar>> coefficient_table(
    const BasicNoiseSchedule<Scalar>& s) {
  std::vector<CoefficientRow<Scalar>> rows;
  rows.reserve(static_cast<std::size_t>(s.timesteps() - 1));
  for (int t = s.timesteps(); t >= 2; --t)
    rows.push_back({t, s.gamma0(t), s.gamma1(t), s.gamma2(t), s.tilde_beta(t)});
  return rows;
}

}  // namespace dbt
