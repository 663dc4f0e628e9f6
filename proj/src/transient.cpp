#include "fracq/transient.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fracq/errors.hpp"
#include "fracq/specfun.hpp"

namespace fracq::transient {
namespace {

using specfun::FractionalPoissonPmf;

void validate_query_params(const sim::ModelParams& params) {
  params.validate();
  if (std::abs(params.lambda - params.mu) <= 1e-12 * params.theta()) {
    throw unsupported_parameter_error(
        "transient formulas require lambda != mu (no limiting form is implemented)");
  }
}

// ln Gamma(n+1) for integer n, memoized per call site via a growable table.
class LogFactorialTable {
 public:
  double operator()(long n) {
    if (n < 0) return std::numeric_limits<double>::infinity();
    while (static_cast<long>(table_.size()) <= n) {
      table_.push_back(std::lgamma(static_cast<double>(table_.size()) + 1.0));
    }
    return table_[static_cast<std::size_t>(n)];
  }

 private:
  std::vector<double> table_{0.0};
};

// The state-probability series regrouped around the fractional Poisson weights
// g_d = x^{d-1} E^d_{alpha, alpha(d-1)+1}(-x), x = theta t^alpha:
//
//   p_k = (1-r) r^k
//       + r^k (theta/mu) sum_{d>=1} g_d  sum_{r0(d)<=j<=d} ((2j-d)/d) Bin(d,p)(j)
//       + sum_{r>=0} g_{k+2r-i+1} [ Bin(d-1,q)(r) - (q/p)^i Bin(d-1,p)(k+r) ].
//
// Every bracket is bounded by 1 + (mu/lambda)^i, so truncating the weight tail
// bounds the series tail.
struct SeriesEvaluator {
  const sim::ModelParams& params;
  const FractionalPoissonPmf& weights;
  LogFactorialTable& lf;

  double binom_pmf(long n, double p_success, long j) const {
    if (j < 0 || j > n) return 0.0;
    return std::exp(lf(n) - lf(j) - lf(n - j) + j * std::log(p_success) +
                    (n - j) * std::log1p(-p_success));
  }

  double evaluate(long k) const {
    const double lam = params.lambda, mu = params.mu, theta = params.theta();
    const long i = params.initial_state;
    const double p = lam / theta, q = mu / theta;
    const double rho = lam / mu;
    const double rho_k = std::pow(rho, static_cast<double>(k));

    double total = (1.0 - rho) * rho_k;

    // Double series. For d <= k+i the inner sum runs over the full binomial
    // support and collapses to 2p - 1.
    const long d_count = static_cast<long>(weights.pmf.size());
    double series = 0.0;
    for (long d = 1; d <= d_count; ++d) {
      const double g = weights.pmf[static_cast<std::size_t>(d - 1)];
      if (g == 0.0) continue;
      double inner;
      if (d <= k + i) {
        inner = 2.0 * p - 1.0;
      } else {
        inner = 0.0;
        const long j0 = std::max<long>(0, (d - k - i + 1) / 2);
        for (long j = j0; j <= d; ++j) {
          inner += (2.0 * j - d) / static_cast<double>(d) * binom_pmf(d, p, j);
        }
      }
      series += g * inner;
    }
    total += rho_k * (theta / mu) * series;

    // Single series over r with d = k + 2r - i + 1.
    const double ln_qp_i = i * (std::log(q) - std::log(p));
    long r = 0;
    while (k + 2 * r - i < 0) ++r;
    for (; k + 2 * r - i + 1 <= d_count; ++r) {
      const long d = k + 2 * r - i + 1;
      const double g = weights.pmf[static_cast<std::size_t>(d - 1)];
      if (g == 0.0) continue;
      double bracket = binom_pmf(d - 1, q, r);
      if (r >= i && k + r <= d - 1) {
        bracket -= std::exp(lf(d - 1) - lf(k + r) - lf(r - i) +
                            (k + r) * std::log(p) + (r - i) * std::log(q) + ln_qp_i);
      }
      total += g * bracket;
    }
    return total;
  }

  double tail_bound(long k) const {
    const double rho = params.lambda / params.mu;
    const double factor = std::pow(rho, static_cast<double>(k)) * params.theta() / params.mu +
                          1.0 + std::pow(1.0 / rho, static_cast<double>(params.initial_state));
    return weights.tail * factor;
  }
};

TransientResult finish_result(const sim::ModelParams& params, double raw,
                              std::size_t terms, double bound) {
  TransientResult res;
  res.raw_probability = raw;
  res.probability = std::clamp(raw, 0.0, 1.0);
  res.terms_used = terms;
  res.truncation_bound = bound;
  res.unstable_regime = params.lambda > params.mu;
  return res;
}

}  // namespace

TransientResult state_probability(const TransientQuery& query) {
  validate_query_params(query.params);
  if (query.k < 0) throw std::invalid_argument("state index k must be >= 0");
  if (!(query.t >= 0.0)) throw std::invalid_argument("time t must be >= 0");
  if (!(query.tol > 0.0)) throw std::invalid_argument("tolerance must be positive");
  if (query.t == 0.0) {
    return finish_result(query.params, query.k == query.params.initial_state ? 1.0 : 0.0,
                         0, 0.0);
  }
  const double x = query.params.theta() * std::pow(query.t, query.params.alpha);
  // The weight tail gets multiplied by the coefficient bound; shrink it so the
  // final truncation bound lands at or below tol.
  const double rho = query.params.lambda / query.params.mu;
  const double factor =
      std::pow(rho, static_cast<double>(query.k)) * query.params.theta() / query.params.mu +
      1.0 + std::pow(1.0 / rho, static_cast<double>(query.params.initial_state));
  const FractionalPoissonPmf weights = specfun::fractional_poisson_pmf(
      query.params.alpha, x, 0.1 * query.tol / std::max(1.0, factor));
  LogFactorialTable lf;
  SeriesEvaluator eval{query.params, weights, lf};
  return finish_result(query.params, eval.evaluate(query.k), weights.pmf.size(),
                       eval.tail_bound(query.k));
}

std::vector<TransientResult> state_probabilities(const sim::ModelParams& params,
                                                 long k_max, double t, double tol) {
  validate_query_params(params);
  if (k_max < 0) throw std::invalid_argument("k_max must be >= 0");
  if (!(t >= 0.0)) throw std::invalid_argument("time t must be >= 0");
  if (!(tol > 0.0)) throw std::invalid_argument("tolerance must be positive");
  std::vector<TransientResult> out;
  out.reserve(static_cast<std::size_t>(k_max) + 1);
  if (t == 0.0) {
    for (long k = 0; k <= k_max; ++k) {
      out.push_back(finish_result(params, k == params.initial_state ? 1.0 : 0.0, 0, 0.0));
    }
    return out;
  }
  const double x = params.theta() * std::pow(t, params.alpha);
  const double rho = params.lambda / params.mu;
  double max_factor = 1.0 + std::pow(1.0 / rho, static_cast<double>(params.initial_state));
  max_factor += std::pow(rho, rho > 1.0 ? static_cast<double>(k_max) : 0.0) *
                params.theta() / params.mu;
  const FractionalPoissonPmf weights = specfun::fractional_poisson_pmf(
      params.alpha, x, 0.1 * tol / std::max(1.0, max_factor));
  LogFactorialTable lf;
  SeriesEvaluator eval{params, weights, lf};
  for (long k = 0; k <= k_max; ++k) {
    out.push_back(finish_result(params, eval.evaluate(k), weights.pmf.size(),
                                eval.tail_bound(k)));
  }
  return out;
}

// Sharma's closed form for alpha = 1, factored into Poisson pmf/cdf pieces so
// every intermediate stays O(1):
//   p_k = (1-r) r^k
//       + r^k sum_r pois(r; lt) [ (r/mt) P(mt <= M) - P(mt <= M-1) ],  M = k+r+i
//       + sum_r [ pois(k+r-i; lt) pois(r; mt)
//                 - (mu/lambda)^i pois(k+r; lt) pois(r-i; mt) ].
double state_probability_classical(const sim::ModelParams& params, long k, double t,
                                   double tol) {
  validate_query_params(params);
  if (k < 0) throw std::invalid_argument("state index k must be >= 0");
  if (!(t >= 0.0)) throw std::invalid_argument("time t must be >= 0");
  if (t == 0.0) return k == params.initial_state ? 1.0 : 0.0;
  const long i = params.initial_state;
  const double lt = params.lambda * t;
  const double mt = params.mu * t;
  const double rho = params.lambda / params.mu;
  const double rho_k = std::pow(rho, static_cast<double>(k));

  // pois_l[r] = e^{-lt}(lt)^r/r!, pois_m likewise; both extended on demand.
  std::vector<double> pois_l{std::exp(-lt)}, pois_m{std::exp(-mt)};
  auto extend = [](std::vector<double>& v, double mean, std::size_t upto) {
    while (v.size() <= upto) v.push_back(v.back() * mean / static_cast<double>(v.size()));
  };

  const long r_max = static_cast<long>(
      lt + mt + 12.0 * std::sqrt(lt + mt + 1.0) + 16.0 - std::log(tol));
  extend(pois_l, lt, static_cast<std::size_t>(r_max + k + i + 2));
  extend(pois_m, mt, static_cast<std::size_t>(r_max + k + i + 2));

  // Poisson CDF P(mt <= M) maintained incrementally: M = k+r+i steps by one per r.
  double cdf_m = 0.0;
  long cdf_upto = -1;
  auto cdf_to = [&](long target) {
    while (cdf_upto < target) {
      ++cdf_upto;
      cdf_m += pois_m[static_cast<std::size_t>(cdf_upto)];
    }
    return cdf_m;
  };

  double total = (1.0 - rho) * rho_k;
  double second = 0.0, third = 0.0;
  const double mu_lam_i = std::pow(params.mu / params.lambda, static_cast<double>(i));
  for (long r = 0; r <= r_max; ++r) {
    const long big_m = k + r + i;
    const double cdf_m1 = cdf_to(big_m - 1);  // P(mt <= M-1)
    const double cdf_m0 = cdf_to(big_m);
    second += pois_l[static_cast<std::size_t>(r)] *
              ((r / mt) * cdf_m0 - cdf_m1);
    const long a1 = k + r - i;
    double piece = 0.0;
    if (a1 >= 0) piece += pois_l[static_cast<std::size_t>(a1)] * pois_m[static_cast<std::size_t>(r)];
    if (r >= i) {
      piece -= mu_lam_i * pois_l[static_cast<std::size_t>(k + r)] *
               pois_m[static_cast<std::size_t>(r - i)];
    }
    third += piece;
  }
  return total + rho_k * second + third;
}

double steady_state(const sim::ModelParams& params, long k) {
  params.validate();
  if (k < 0) throw std::invalid_argument("state index k must be >= 0");
  if (!(params.lambda < params.mu)) {
    throw unsupported_parameter_error("steady state requires lambda < mu");
  }
  const double rho = params.lambda / params.mu;
  return (1.0 - rho) * std::pow(rho, static_cast<double>(k));
}

double mean_queue_length(const sim::ModelParams& params, double t, double tol) {
  validate_query_params(params);
  if (!(t >= 0.0)) throw std::invalid_argument("time t must be >= 0");
  if (!(tol > 0.0)) throw std::invalid_argument("tolerance must be positive");
  if (t == 0.0) return static_cast<double>(params.initial_state);
  const double drift = (params.lambda - params.mu) *
                       std::pow(t, params.alpha) / std::tgamma(params.alpha + 1.0);
  const double inner_tol = std::min(1e-10, 0.01 * tol);
  auto p0 = [&](double y) {
    TransientQuery q{params, 0, y, inner_tol};
    return state_probability(q).probability;
  };
  const double correction =
      params.mu *
      specfun::rl_fractional_integral(p0, params.alpha, t, 0.1 * tol / params.mu);
  return static_cast<double>(params.initial_state) + drift + correction;
}

std::pair<std::complex<double>, std::complex<double>> characteristic_roots(
    const sim::ModelParams& params, std::complex<double> s) {
  validate_query_params(params);
  if (!(s.real() > 0.0)) throw std::invalid_argument("Re(s) must be positive");
  const std::complex<double> sa = std::pow(s, params.alpha);
  const std::complex<double> big = sa + params.theta();
  std::complex<double> sq = std::sqrt(big * big - 4.0 * params.lambda * params.mu);
  // Orient the square root so big + sq is the larger-magnitude combination,
  // then recover the small root from the product a1 a2 = mu/lambda.
  if ((conj(big) * sq).real() < 0.0) sq = -sq;
  const std::complex<double> a1 = (big + sq) / (2.0 * params.lambda);
  const std::complex<double> a2 = params.mu / (params.lambda * a1);
  return {a2, a1};
}

std::complex<double> laplace_p0(const sim::ModelParams& params, std::complex<double> s) {
  const auto [a2, a1] = characteristic_roots(params, s);
  (void)a1;
  const std::complex<double> sa1 = std::pow(s, params.alpha - 1.0);
  return sa1 * std::pow(a2, static_cast<double>(params.initial_state + 1)) /
         (params.mu * (1.0 - a2));
}

namespace {

// Stehfest weights for n = 14 terms (exact in double: all factorials <= 14!).
std::vector<double> stehfest_weights() {
  constexpr int n = 14;
  constexpr int half = n / 2;
  auto fact = [](int k) {
    double f = 1.0;
    for (int j = 2; j <= k; ++j) f *= j;
    return f;
  };
  std::vector<double> v(n + 1, 0.0);
  for (int k = 1; k <= n; ++k) {
    double sum = 0.0;
    for (int j = (k + 1) / 2; j <= std::min(k, half); ++j) {
      sum += std::pow(static_cast<double>(j), half) * fact(2 * j) /
             (fact(half - j) * fact(j) * fact(j - 1) * fact(k - j) * fact(2 * j - k));
    }
    v[k] = ((k + half) % 2 == 0 ? 1.0 : -1.0) * sum;
  }
  return v;
}

double invert_talbot(const std::function<std::complex<double>(std::complex<double>)>& f,
                     double t) {
  constexpr int m = 48;
  const double r = 2.0 * m / (5.0 * t);
  double sum = 0.5 * std::exp(r * t) * f(std::complex<double>(r, 0.0)).real();
  for (int k = 1; k < m; ++k) {
    const double theta = k * specfun::pi / m;
    const double cot = std::cos(theta) / std::sin(theta);
    const std::complex<double> s(r * theta * cot, r * theta);
    const double sigma = theta + (theta * cot - 1.0) * cot;
    const std::complex<double> val =
        std::exp(s * t) * f(s) * std::complex<double>(1.0, sigma);
    sum += val.real();
  }
  return sum * r / m;
}

}  // namespace

double invert_laplace(const std::function<std::complex<double>(std::complex<double>)>& f,
                      double t, InversionMethod method) {
  if (!(t > 0.0)) throw std::invalid_argument("invert_laplace requires t > 0");
  if (method == InversionMethod::talbot) return invert_talbot(f, t);
  static const std::vector<double> weights = stehfest_weights();
  const double ln2_t = std::log(2.0) / t;
  double sum = 0.0, max_term = 0.0;
  for (int k = 1; k <= 14; ++k) {
    const double term = weights[k] * f(std::complex<double>(k * ln2_t, 0.0)).real();
    sum += term;
    max_term = std::max(max_term, std::abs(term));
  }
  const double value = ln2_t * sum;
  // The alternating Stehfest sum loses ~8 digits through its coefficients; when
  // the result sits far below the largest term, fall back to the Talbot contour.
  if (max_term * ln2_t > 1e10 * std::max(std::abs(value), 1e-280)) {
    const double talbot = invert_talbot(f, t);
    if (!std::isfinite(talbot)) {
      throw convergence_error("Laplace inversion diverged for both methods", value, 14);
    }
    return talbot;
  }
  return value;
}

}  // namespace fracq::transient

