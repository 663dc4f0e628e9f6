#pragma once

#include <complex>
#include <functional>
#include <vector>

#include "fracq/sim.hpp"

namespace fracq::transient {

struct TransientQuery {
  sim::ModelParams params;
  long k;                // target state
  double t;              // time >= 0
  double tol = 1e-10;    // truncation tolerance
};

struct TransientResult {
  double probability;       // clamped to [0, 1]
  double raw_probability;   // before clamping
  std::size_t terms_used;   // fractional Poisson weights consumed
  double truncation_bound;  // bound on the discarded series mass
  bool unstable_regime;     // lambda > mu: formula evaluated outside its derivation
};

// Transient state probability p_k^alpha(t) of the fractional M/M/1 queue via
// the generalized Mittag-Leffler series (steady-state addend + double series +
// single series). Requires lambda != mu.
TransientResult state_probability(const TransientQuery& query);

// Shared-weight batch evaluation of p_0..p_kmax at one time point.
std::vector<TransientResult> state_probabilities(const sim::ModelParams& params,
                                                 long k_max, double t,
                                                 double tol = 1e-10);

// Classical (alpha = 1) state probabilities from the closed-form double-sum
// solution, evaluated through Poisson pmf/cdf recurrences. Serves as the
// alpha = 1 oracle for state_probability; the alpha field of params is ignored.
double state_probability_classical(const sim::ModelParams& params, long k, double t,
                                   double tol = 1e-12);

// Geometric steady-state law (1 - lambda/mu)(lambda/mu)^k; requires lambda < mu.
double steady_state(const sim::ModelParams& params, long k);

// E N^alpha(t) = i + (lambda-mu) t^alpha / Gamma(alpha+1)
//              + mu J^alpha[p_0^alpha](t).
double mean_queue_length(const sim::ModelParams& params, double t, double tol = 1e-8);

// Laplace transform of p_0^alpha: s^{alpha-1} a2(s)^{i+1} / (mu (1 - a2(s)))
// where a2 is the smaller-modulus zero of z s^alpha - (1-z)(mu - lambda z).
std::complex<double> laplace_p0(const sim::ModelParams& params, std::complex<double> s);

// Both zeros, ordered |a2| < |a1|. They satisfy a1 + a2 = (s^alpha+theta)/lambda
// and a1 a2 = mu/lambda.
std::pair<std::complex<double>, std::complex<double>> characteristic_roots(
    const sim::ModelParams& params, std::complex<double> s);

enum class InversionMethod { gaver_stehfest, talbot };

// Numerical Laplace inversion at t > 0. Gaver-Stehfest (14 terms) by default,
// with automatic fallback to the fixed Talbot contour when the alternating
// Stehfest sum shows catastrophic cancellation.
double invert_laplace(const std::function<std::complex<double>(std::complex<double>)>& f,
                      double t, InversionMethod method = InversionMethod::gaver_stehfest);

}  // namespace fracq::transient
