#include "fracq/estimate.hpp"

#include <algorithm>
#include <cmath>

#include "fracq/specfun.hpp"

namespace fracq::estimate {
namespace {

using specfun::euler_gamma;
using specfun::pi;
using specfun::zeta3;

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

std::vector<double> log_durations(const sim::SojournData& data) {
  std::vector<double> out;
  out.reserve(data.size());
  for (const auto& rec : data.records) {
    if (!(rec.duration > 0.0) || !std::isfinite(rec.duration)) {
      throw std::invalid_argument("sojourn durations must be positive and finite");
    }
    out.push_back(std::log(rec.duration));
  }
  return out;
}

double check_level(double level) {
  if (!(level > 0.0) || !(level < 1.0)) {
    throw std::invalid_argument("confidence level must be in (0, 1)");
  }
  return normal_quantile(1.0 - 0.5 * (1.0 - level));
}

// Per-observation asymptotic variance of alpha_hat: alpha^2 (32-20a^2-a^4)/40.
double alpha_variance_factor(double alpha_hat) {
  const double a2 = alpha_hat * alpha_hat;
  return std::max(0.0, a2 * (32.0 - 20.0 * a2 - a2 * a2) / 40.0);
}

std::size_t count_births(const sim::SojournData& data) {
  std::size_t nb = 0;
  for (const auto& rec : data.records) nb += rec.type == sim::EventType::birth;
  return nb;
}

// Kolmogorov asymptotic tail Q(z) = 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 z^2).
double ks_tail(double z) {
  if (z < 1e-3) return 1.0;
  double sum = 0.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = std::exp(-2.0 * j * j * z * z);
    sum += (j % 2 == 1) ? term : -term;
    if (term < 1e-18) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

double ks_p_value(double statistic, double n_effective) {
  const double sq = std::sqrt(n_effective);
  return ks_tail((sq + 0.12 + 0.11 / sq) * statistic);
}

}  // namespace

double normal_quantile(double p) {
  if (!(p > 0.0) || !(p < 1.0)) {
    throw std::invalid_argument("normal_quantile requires p in (0, 1)");
  }
  // Acklam's rational approximation, then one Halley step on the erfc form.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  const double u = e * std::sqrt(2.0 * pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

double alpha_hat_from_residual_variance(double sigma2) {
  if (!(sigma2 >= 0.0)) throw std::invalid_argument("residual variance must be >= 0");
  return 1.0 / std::sqrt(3.0 * (sigma2 / (pi * pi) + 1.0 / 6.0));
}

RegressionFit fit_log_regression(const sim::SojournData& data) {
  const std::size_t n = data.size();
  if (n < 3) throw std::invalid_argument("linear fit requires at least 3 sojourns");
  std::vector<double> x;
  x.reserve(n);
  for (const auto& rec : data.records) {
    if (rec.state_before < 1) {
      throw std::invalid_argument("linear birth-death sojourns require state >= 1");
    }
    x.push_back(std::log(static_cast<double>(rec.state_before)));
  }
  const std::vector<double> y = log_durations(data);
  const double xbar = mean_of(x);
  const double ybar = mean_of(y);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    sxx += (x[j] - xbar) * (x[j] - xbar);
    sxy += (x[j] - xbar) * y[j];
  }
  if (!(sxx > 0.0)) {
    throw ill_conditioned_error("all sojourn states coincide; the slope is unidentified");
  }
  RegressionFit fit;
  fit.b1_hat = sxy / sxx;
  fit.b0_hat = ybar - fit.b1_hat * xbar;
  fit.ln_k_bar = xbar;
  fit.s_xx = sxx;
  fit.residuals.resize(n);
  double rss = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    fit.residuals[j] = y[j] - fit.b0_hat - fit.b1_hat * x[j];
    rss += fit.residuals[j] * fit.residuals[j];
  }
  fit.sigma2_eps_hat = rss / static_cast<double>(n - 2);
  return fit;
}

EstimationResult fit_linear_bd(const sim::SojournData& data, double level) {
  check_level(level);
  const RegressionFit fit = fit_log_regression(data);
  const std::size_t n = data.size();

  EstimationResult est;
  est.model = Model::linear_bd;
  est.n = n;
  est.n_births = count_births(data);
  est.n_deaths = n - est.n_births;
  est.level = level;
  est.alpha_hat = alpha_hat_from_residual_variance(fit.sigma2_eps_hat);

  // Small-sample replacement of the LS intercept: average of ln S_k - b1 ln k
  // with the slope pinned to its model value b1 = -1/alpha_hat.
  double b0 = 0.0;
  for (const auto& rec : data.records) {
    b0 += std::log(rec.duration) +
          std::log(static_cast<double>(rec.state_before)) / est.alpha_hat;
  }
  b0 /= static_cast<double>(n);

  est.theta_hat = std::exp(-est.alpha_hat * (b0 + euler_gamma));
  est.p_hat = static_cast<double>(est.n_births) / static_cast<double>(n);
  est.lambda_hat = est.p_hat * est.theta_hat;
  est.mu_hat = est.theta_hat - est.lambda_hat;

  est.ci_alpha = interval_alpha(est.alpha_hat, n, level);
  est.se_alpha = est.ci_alpha.half_width() / check_level(level);
  auto [ci_l, ci_m] = interval_rates_linear(fit, est, n, level);
  est.ci_lambda = ci_l;
  est.ci_mu = ci_m;
  const double z = check_level(level);
  est.se_lambda = ci_l.half_width() / z;
  est.se_mu = ci_m.half_width() / z;
  return est;
}

EstimationResult fit_mm1(const sim::SojournData& data, double level,
                         bool exclude_zero_state) {
  check_level(level);
  sim::SojournData kept;
  if (exclude_zero_state) {
    for (const auto& rec : data.records) {
      if (rec.state_before == 0) continue;
      kept.records.push_back(rec);
      if (rec.type == sim::EventType::birth) {
        ++kept.n_births;
      } else {
        ++kept.n_deaths;
      }
    }
  }
  const sim::SojournData& used = exclude_zero_state ? kept : data;
  const std::size_t n = used.size();
  if (n < 2) throw std::invalid_argument("mm1 fit requires at least 2 sojourns");

  const std::vector<double> y = log_durations(used);
  const double ybar = mean_of(y);
  double ss = 0.0;
  for (double v : y) ss += (v - ybar) * (v - ybar);
  const double variance = ss / static_cast<double>(n - 1);
  if (!(variance > 0.0)) {
    throw degenerate_data_error("log-sojourn sample variance is zero");
  }

  EstimationResult est;
  est.model = Model::mm1;
  est.n = n;
  est.n_births = count_births(used);
  est.n_deaths = n - est.n_births;
  est.level = level;
  est.alpha_hat = pi / std::sqrt(3.0 * (variance + pi * pi / 6.0));
  est.theta_hat = std::exp(-est.alpha_hat * (ybar + euler_gamma));
  est.p_hat = static_cast<double>(est.n_births) / static_cast<double>(n);
  est.lambda_hat = est.p_hat * est.theta_hat;
  est.mu_hat = est.theta_hat - est.lambda_hat;

  est.ci_alpha = interval_alpha(est.alpha_hat, n, level);
  const double z = check_level(level);
  est.se_alpha = est.ci_alpha.half_width() / z;
  auto [ci_l, ci_m] = interval_rates_mm1(est, n, level);
  est.ci_lambda = ci_l;
  est.ci_mu = ci_m;
  est.se_lambda = ci_l.half_width() / z;
  est.se_mu = ci_m.half_width() / z;
  return est;
}

Interval interval_alpha(double alpha_hat, std::size_t n, double level) {
  if (!(alpha_hat > 0.0)) throw std::invalid_argument("alpha_hat must be positive");
  if (n < 2) throw std::invalid_argument("interval_alpha requires n >= 2");
  const double z = check_level(level);
  const double se = std::sqrt(alpha_variance_factor(alpha_hat) / static_cast<double>(n));
  return {alpha_hat - z * se, alpha_hat + z * se};
}

std::pair<Interval, Interval> interval_rates_linear(const RegressionFit& fit,
                                                    const EstimationResult& est,
                                                    std::size_t n, double level) {
  if (!(fit.s_xx > 0.0)) {
    throw ill_conditioned_error("regression design is degenerate (s_xx = 0)");
  }
  const double z = check_level(level);
  const double a = est.alpha_hat;
  const double theta = est.theta_hat;
  // Delta-method variance of sqrt(n)(theta_hat - theta) for the
  // replaced-intercept estimator: the alpha channel enters through
  // (ln theta + mean ln k), the noise channel through alpha^2 sigma_eps^2.
  const double shift = std::log(theta) + fit.ln_k_bar;
  const double sigma2_theta =
      theta * theta *
      (shift * shift * alpha_variance_factor(a) / (a * a) + a * a * fit.sigma2_eps_hat);
  const double p = est.p_hat, q = 1.0 - p;
  const double nn = static_cast<double>(n);
  const double se_l = std::sqrt((theta * theta * p * q + p * p * sigma2_theta) / nn);
  const double se_m = std::sqrt((theta * theta * p * q * q + q * q * sigma2_theta) / nn);
  return {{est.lambda_hat - z * se_l, est.lambda_hat + z * se_l},
          {est.mu_hat - z * se_m, est.mu_hat + z * se_m}};
}

std::pair<Interval, Interval> interval_rates_mm1(const EstimationResult& est,
                                                 std::size_t n, double level) {
  const double z = check_level(level);
  const double a = est.alpha_hat;
  const double theta = est.theta_hat;
  const double lt = std::log(theta);
  const double a2 = a * a;
  const double pi2 = pi * pi;
  const double sigma2_theta =
      theta * theta *
      (20.0 * pi2 * pi2 * (2.0 - a2) - 3.0 * pi2 * (a2 * a2 + 20.0 * a2 - 32.0) * lt * lt -
       720.0 * a2 * a * lt * zeta3) /
      (120.0 * pi2);
  const double s2t = std::max(0.0, sigma2_theta);
  const double p = est.p_hat, q = 1.0 - p;
  const double nn = static_cast<double>(n);
  const double se_l = std::sqrt((theta * theta * p * q + p * p * s2t) / nn);
  const double se_m = std::sqrt((theta * theta * p * q * q + q * q * s2t) / nn);
  return {{est.lambda_hat - z * se_l, est.lambda_hat + z * se_l},
          {est.mu_hat - z * se_m, est.mu_hat + z * se_m}};
}

KsResult ks_two_sample(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.empty() || y.empty()) {
    throw std::invalid_argument("ks_two_sample requires non-empty samples");
  }
  std::vector<double> xs(x), ys(y);
  std::sort(xs.begin(), xs.end());
  std::sort(ys.begin(), ys.end());
  const double nx = static_cast<double>(xs.size()), ny = static_cast<double>(ys.size());
  std::size_t ix = 0, iy = 0;
  double d = 0.0;
  while (ix < xs.size() && iy < ys.size()) {
    const double v = std::min(xs[ix], ys[iy]);
    while (ix < xs.size() && xs[ix] <= v) ++ix;
    while (iy < ys.size() && ys[iy] <= v) ++iy;
    d = std::max(d, std::abs(ix / nx - iy / ny));
  }
  const double ne = nx * ny / (nx + ny);
  return {d, ks_p_value(d, ne)};
}

KsResult ks_one_sample(const std::vector<double>& x,
                       const std::function<double(double)>& cdf) {
  if (x.empty()) throw std::invalid_argument("ks_one_sample requires a non-empty sample");
  std::vector<double> xs(x);
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max(d, std::max((i + 1) / n - f, f - i / n));
  }
  return {d, ks_p_value(d, n)};
}

double rate_fit_test(const sim::SojournData& data, const EstimationResult& est,
                     std::size_t m, double significance, std::uint64_t seed,
                     std::uint64_t stream_base) {
  if (m < 1) throw std::invalid_argument("rate_fit_test requires m >= 1");
  if (!(significance > 0.0) || !(significance < 1.0)) {
    throw std::invalid_argument("significance must be in (0, 1)");
  }
  std::vector<double> residuals;
  if (est.model == Model::linear_bd) {
    residuals = fit_log_regression(data).residuals;
  } else {
    residuals = log_durations(data);
    const double ybar = mean_of(residuals);
    for (double& v : residuals) v -= ybar;
  }
  // The error law only enters through alpha; clamp at 1 when the point estimate
  // drifts above it, as the sampler is defined on (0, 1].
  const double alpha_sim = std::min(est.alpha_hat, 1.0);
  const std::size_t n = residuals.size();
  std::size_t accepted = 0;
  std::vector<double> simulated(n);
  for (std::size_t j = 0; j < m; ++j) {
    rng::RngStream stream(seed, stream_base + j);
    for (std::size_t i = 0; i < n; ++i) {
      simulated[i] =
          std::log(rng::sample_ml_sojourn(stream, alpha_sim, 1.0)) + euler_gamma;
    }
    accepted += ks_two_sample(residuals, simulated).p_value >= significance;
  }
  return static_cast<double>(accepted) / static_cast<double>(m);
}

}  // namespace fracq::estimate
