#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "fracq/errors.hpp"

namespace fracq::specfun {

inline constexpr double pi = 3.141592653589793238;
inline constexpr double euler_gamma = 0.577215664901532861;
inline constexpr double zeta3 = 1.202056903159594285;

// Parameters of the generalized (Prabhakar) Mittag-Leffler function
//   E^delta_{beta,gamma}(w) = sum_r (delta)_r w^r / (r! Gamma(beta r + gamma)).
// delta = 1 gives the two-parameter function, gamma = delta = 1 the classical one.
struct MLParams {
  double beta;
  double gamma = 1.0;
  double delta = 1.0;
};

// Evaluates E^delta_{beta,gamma}(w) for real w. Dispatches between a plain
// compensated series, an arbitrary-precision series (when the alternating terms
// grow before decaying), a spectral integral (delta = gamma = 1, w < 0) and the
// algebraic-decay expansion for large negative w. Relative accuracy ~1e-12 over
// |w| <= 50.
double ml(const MLParams& params, double w);

// Survival function of the Mittag-Leffler sojourn law:
//   Pr{S >= t} = E_{alpha,1}(-rate * t^alpha), alpha in (0,1], rate >= 0.
double ml_survival(double alpha, double rate, double t);

// Riemann-Liouville fractional integral
//   (J^alpha f)(t) = (1/Gamma(alpha)) \int_0^t (t-y)^{alpha-1} f(y) dy,
// evaluated with a singularity-removing substitution and adaptive quadrature.
double rl_fractional_integral(const std::function<double(double)>& f, double alpha,
                              double t, double abs_tol = 1e-10);

// Mean and variance of the log-transformed Mittag-Leffler sojourn time:
//   mean = -ln(rate)/alpha - euler_gamma, var = pi^2 (1/(3 alpha^2) - 1/6).
struct LogMlMoments {
  double mean;
  double variance;
};
LogMlMoments log_ml_moments(double alpha, double rate);

// Probability mass function of the fractional Poisson law,
//   pmf[n] = x^n E^{n+1}_{alpha, alpha n + 1}(-x),  x = rate * t^alpha,
// computed until the accounted mass exceeds 1 - tail_tol. These weights carry
// the entire alpha-dependence of the transient state probabilities.
struct FractionalPoissonPmf {
  std::vector<double> pmf;
  double tail;  // 1 - sum(pmf), always >= 0 up to rounding
};
FractionalPoissonPmf fractional_poisson_pmf(double alpha, double x, double tail_tol,
                                            std::size_t cap = 20000);

}  // namespace fracq::specfun
