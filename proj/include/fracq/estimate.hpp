#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "fracq/errors.hpp"
#include "fracq/sim.hpp"

namespace fracq::estimate {

enum class Model { linear_bd, mm1 };

// Least-squares fit of ln S_k = b0 + b1 ln k + eps_k over the observed sojourns.
struct RegressionFit {
  double b0_hat;
  double b1_hat;
  std::vector<double> residuals;
  double sigma2_eps_hat;  // unbiased, divisor n-2
  double ln_k_bar;
  double s_xx;            // sum of squared centered regressors
};

struct Interval {
  double lo;
  double hi;
  bool contains(double v) const { return lo <= v && v <= hi; }
  double half_width() const { return 0.5 * (hi - lo); }
};

struct EstimationResult {
  Model model;
  std::size_t n = 0;
  std::size_t n_births = 0;
  std::size_t n_deaths = 0;
  double alpha_hat = 0.0;
  double theta_hat = 0.0;
  double lambda_hat = 0.0;
  double mu_hat = 0.0;
  double p_hat = 0.0;  // n_births / n
  double se_alpha = 0.0;
  double se_lambda = 0.0;
  double se_mu = 0.0;
  Interval ci_alpha{0.0, 0.0};
  Interval ci_lambda{0.0, 0.0};
  Interval ci_mu{0.0, 0.0};
  double level = 0.95;
};

// (1 - epsilon/2) standard normal quantile, accurate to ~1e-15.
double normal_quantile(double p);

// alpha_hat = [3 (sigma2/pi^2 + 1/6)]^{-1/2}; equals 1 at sigma2 = pi^2/6.
double alpha_hat_from_residual_variance(double sigma2);

RegressionFit fit_log_regression(const sim::SojournData& data);

// Closed-form estimators for the fractional linear birth-death process:
// residual-based alpha_hat, small-sample intercept replacement for theta_hat,
// intensity split by the observed birth fraction.
EstimationResult fit_linear_bd(const sim::SojournData& data, double level = 0.95);

// Method-of-moments estimators for the fractional M/M/1 / simple birth-death
// process from the IID log-sojourn sample. exclude_zero_state drops sojourns
// departing the empty queue so the IID Mittag-Leffler(theta) assumption holds.
EstimationResult fit_mm1(const sim::SojournData& data, double level = 0.95,
                         bool exclude_zero_state = false);

Interval interval_alpha(double alpha_hat, std::size_t n, double level);

std::pair<Interval, Interval> interval_rates_linear(const RegressionFit& fit,
                                                    const EstimationResult& est,
                                                    std::size_t n, double level);

std::pair<Interval, Interval> interval_rates_mm1(const EstimationResult& est,
                                                 std::size_t n, double level);

struct KsResult {
  double statistic;
  double p_value;
};

KsResult ks_two_sample(const std::vector<double>& x, const std::vector<double>& y);

// One-sample test of a sample against an analytic CDF (test utility used by
// the sampler checks).
KsResult ks_one_sample(const std::vector<double>& x,
                       const std::function<double(double)>& cdf);

// Simulates m samples from the fitted error law ln(E^{1/alpha} T_alpha) + gamma
// and KS-tests each against the observed residuals. Returns the proportion of
// non-rejections at the given significance. Sample j draws from the substream
// (seed, stream_base + j), so the loop parallelizes without coordination.
double rate_fit_test(const sim::SojournData& data, const EstimationResult& est,
                     std::size_t m, double significance, std::uint64_t seed,
                     std::uint64_t stream_base = 0);

}  // namespace fracq::estimate
