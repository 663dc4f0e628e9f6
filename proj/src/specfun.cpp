#include "fracq/specfun.hpp"

#include <mpfr.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace fracq::specfun {
namespace {

constexpr double ln2 = 0.6931471805599453094;

double lgamma_abs(double x) {
  int sign;
  return ::lgamma_r(x, &sign);
}

// Signed 1/Gamma(x); exactly 0 at the poles.
double rgamma(double x) {
  if (x <= 0.5 && std::abs(x - std::nearbyint(x)) < 1e-13) return 0.0;
  int sign;
  double lg = ::lgamma_r(x, &sign);
  if (-lg > 709.0) return sign > 0 ? std::numeric_limits<double>::infinity()
                                   : -std::numeric_limits<double>::infinity();
  return sign * std::exp(-lg);
}

double digamma(double x) {
  double r = 0.0;
  while (x < 6.0) {
    r -= 1.0 / x;
    x += 1.0;
  }
  const double z = 1.0 / (x * x);
  return r + std::log(x) - 0.5 / x -
         z * (1.0 / 12 - z * (1.0 / 120 - z * (1.0 / 252 - z / 240)));
}

// ---------------------------------------------------------------------------
// Series diagnostics: location and height of the largest term of
//   t_r = (delta)_r w^r / (r! Gamma(beta r + gamma)).
// ---------------------------------------------------------------------------

struct SeriesScan {
  double max_ln;     // ln of the largest |t_r|
  double first_ln;   // ln |t_0| (or of the first nonzero term)
  double peak_r;
  bool tractable;    // peak within the term budget
};

double ln_term(const MLParams& p, double ln_abs_w, double r) {
  double lg = lgamma_abs(p.beta * r + p.gamma);
  return lgamma_abs(p.delta + r) - lgamma_abs(p.delta) - lgamma_abs(r + 1.0) +
         r * ln_abs_w - lg;
}

SeriesScan scan_series(const MLParams& p, double w) {
  const double ln_abs_w = std::log(std::abs(w));
  // d/dr ln|t_r| = psi(delta+r) - psi(r+1) + ln|w| - beta psi(beta r + gamma)
  auto slope = [&](double r) {
    return digamma(p.delta + r) - digamma(r + 1.0) + ln_abs_w -
           p.beta * digamma(p.beta * r + p.gamma);
  };
  double r0 = 0.0;
  if (p.gamma <= 0.0) r0 = (0.5 - p.gamma) / p.beta;  // step past the initial poles
  SeriesScan s{};
  s.first_ln = ln_term(p, ln_abs_w, r0);
  if (slope(r0) <= 0.0) {
    s.max_ln = s.first_ln;
    s.peak_r = r0;
    s.tractable = true;
    return s;
  }
  double hi = std::max(8.0, 2.0 * r0 + 8.0);
  while (slope(hi) > 0.0) {
    hi *= 2.0;
    if (hi > 4e6) {  // term count alone already beyond any budget
      s.max_ln = ln_term(p, ln_abs_w, hi);
      s.peak_r = hi;
      s.tractable = false;
      return s;
    }
  }
  double lo = r0;
  for (int it = 0; it < 80; ++it) {
    double mid = 0.5 * (lo + hi);
    (slope(mid) > 0.0 ? lo : hi) = mid;
  }
  s.peak_r = 0.5 * (lo + hi);
  s.max_ln = ln_term(p, ln_abs_w, s.peak_r);
  s.tractable = true;
  return s;
}

// Smallest r past the peak where the terms have dropped by `drop` nats.
double series_end(const MLParams& p, double w, const SeriesScan& s, double drop) {
  const double ln_abs_w = std::log(std::abs(w));
  const double target = s.max_ln - drop;
  double lo = s.peak_r, hi = std::max(2.0 * s.peak_r + 16.0, 64.0);
  while (ln_term(p, ln_abs_w, hi) > target) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e8) return hi;
  }
  for (int it = 0; it < 80; ++it) {
    double mid = 0.5 * (lo + hi);
    (ln_term(p, ln_abs_w, mid) > target ? lo : hi) = mid;
  }
  return hi;
}

// ---------------------------------------------------------------------------
// Plain compensated (Kahan) series. Adequate when the terms never grow much
// beyond the first one.
// ---------------------------------------------------------------------------

double series_double(const MLParams& p, double w) {
  constexpr std::size_t cap = 10000;
  double sum = 0.0, comp = 0.0;
  double c = 1.0;  // (delta)_r w^r / r!
  int consecutive_small = 0;
  for (std::size_t r = 0; r < cap; ++r) {
    double term = c * rgamma(p.beta * r + p.gamma);
    double y = term - comp;
    double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
    if (std::abs(term) < 1e-16 * std::max(std::abs(sum), 1e-300) && r > 2) {
      if (++consecutive_small >= 3) return sum;
    } else {
      consecutive_small = 0;
    }
    c *= (p.delta + r) * w / (r + 1.0);
  }
  throw convergence_error("Mittag-Leffler series did not settle within 10^4 terms",
                          sum, static_cast<long>(cap));
}

// ---------------------------------------------------------------------------
// Arbitrary-precision series for the cancellation-heavy region. The working
// precision is sized from the scanned peak term.
// ---------------------------------------------------------------------------

struct MpVal {
  mpfr_t v;
  explicit MpVal(mpfr_prec_t prec) { mpfr_init2(v, prec); }
  MpVal(MpVal&& other) noexcept {
    mpfr_init2(v, mpfr_get_prec(other.v));
    mpfr_swap(v, other.v);
  }
  MpVal(const MpVal&) = delete;
  MpVal& operator=(const MpVal&) = delete;
  MpVal& operator=(MpVal&&) = delete;
  ~MpVal() { mpfr_clear(v); }
};

double series_mpfr(const MLParams& p, double w, const SeriesScan& scan) {
  const double prec_needed = 192.0 + std::max(0.0, scan.max_ln) / ln2;
  if (prec_needed > 32768.0) {
    throw convergence_error(
        "Mittag-Leffler series cancellation exceeds the precision budget", 0.0, 0);
  }
  const mpfr_prec_t prec = static_cast<mpfr_prec_t>(prec_needed);
  const double r_end = series_end(p, w, scan, prec * ln2);
  const std::size_t cap =
      static_cast<std::size_t>(std::min(2e6, 2.0 * r_end + 1024.0));
  if (r_end > 1.5e6) {
    throw convergence_error("Mittag-Leffler series needs an impractical term count",
                            0.0, static_cast<long>(r_end));
  }

  mpfr_t sum, c, term, z, thresh;
  mpfr_inits2(prec, sum, c, term, z, thresh, static_cast<mpfr_ptr>(nullptr));
  mpfr_set_zero(sum, 1);
  mpfr_set_ui(c, 1, MPFR_RNDN);
  // threshold = e^{max_ln} * 2^{-(prec-8)}
  mpfr_set_d(thresh, scan.max_ln, MPFR_RNDN);
  mpfr_exp(thresh, thresh, MPFR_RNDN);
  mpfr_mul_2si(thresh, thresh, -(prec - 8), MPFR_RNDN);

  int consecutive_small = 0;
  std::size_t r = 0;
  for (; r < cap; ++r) {
    const double arg = p.beta * r + p.gamma;
    if (!(arg <= 0.5 && std::abs(arg - std::nearbyint(arg)) < 1e-13)) {
      mpfr_set_d(z, arg, MPFR_RNDN);
      mpfr_gamma(z, z, MPFR_RNDN);
      mpfr_div(term, c, z, MPFR_RNDN);
      mpfr_add(sum, sum, term, MPFR_RNDN);
      if (static_cast<double>(r) > scan.peak_r && mpfr_cmpabs(term, thresh) < 0) {
        if (++consecutive_small >= 3) break;
      } else {
        consecutive_small = 0;
      }
    }
    mpfr_mul_d(c, c, (p.delta + r) * w / (r + 1.0), MPFR_RNDN);
  }
  const double out = mpfr_get_d(sum, MPFR_RNDN);
  mpfr_clears(sum, c, term, z, thresh, static_cast<mpfr_ptr>(nullptr));
  if (r >= cap) {
    throw convergence_error("Mittag-Leffler extended-precision series hit its term cap",
                            out, static_cast<long>(cap));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Algebraic-decay expansion for w -> -inf:
//   E^delta_{beta,gamma}(-y) ~ y^{-delta}/Gamma(delta)
//       * sum_j (-1)^j Gamma(delta+j) y^{-j} / (j! Gamma(gamma - beta(delta+j))).
// ---------------------------------------------------------------------------

bool asymptotic_negative(const MLParams& p, double w, double* out) {
  const double y = -w;
  const double ln_y = std::log(y);
  double sum = 0.0, comp = 0.0;
  double best_rel = std::numeric_limits<double>::infinity();
  double prev_mag = std::numeric_limits<double>::infinity();
  for (int j = 0; j < 120; ++j) {
    const double ln_m = lgamma_abs(p.delta + j) - lgamma_abs(p.delta) -
                        lgamma_abs(j + 1.0) - (p.delta + j) * ln_y;
    const double rg = rgamma(p.gamma - p.beta * (p.delta + j));
    double term = ((j % 2 == 0) ? 1.0 : -1.0) * rg * std::exp(ln_m);
    const double mag = std::abs(term);
    if (j > 1 && mag > prev_mag) break;  // expansion turned divergent
    double yk = term - comp;
    double t = sum + yk;
    comp = (t - sum) - yk;
    sum = t;
    prev_mag = mag > 0.0 ? mag : prev_mag;
    if (mag > 0.0) best_rel = mag / std::max(std::abs(sum), 1e-300);
    if (best_rel < 1e-15) break;
  }
  if (best_rel > 1e-12) return false;
  *out = sum;
  return true;
}

// ---------------------------------------------------------------------------
// Adaptive 15-point Gauss-Legendre quadrature.
// ---------------------------------------------------------------------------

constexpr double kGlNode[8] = {
    0.0000000000000000000, 0.2011940939974345223, 0.3941513470775633699,
    0.5709721726085388475, 0.7244177313601700474, 0.8482065834104272162,
    0.9372733924007059043, 0.9879925180204854284};
constexpr double kGlWeight[8] = {
    0.2025782419255612729, 0.1984314853271115765, 0.1861610000155622110,
    0.1662692058169939336, 0.1395706779261543144, 0.1071592204671719351,
    0.0703660474881081247, 0.0307532419961172684};

template <class F>
double gl15(const F& f, double a, double b) {
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  double s = kGlWeight[0] * f(c);
  for (int i = 1; i < 8; ++i) {
    s += kGlWeight[i] * (f(c - h * kGlNode[i]) + f(c + h * kGlNode[i]));
  }
  return s * h;
}

template <class F>
double adaptive_gl_rec(const F& f, double a, double b, double whole, double tol,
                       int depth) {
  const double m = 0.5 * (a + b);
  const double left = gl15(f, a, m), right = gl15(f, m, b);
  if (depth <= 0 || std::abs(left + right - whole) <= tol) return left + right;
  return adaptive_gl_rec(f, a, m, left, 0.5 * tol, depth - 1) +
         adaptive_gl_rec(f, m, b, right, 0.5 * tol, depth - 1);
}

template <class F>
double adaptive_gl(const F& f, double a, double b, double tol) {
  if (!(b > a)) return 0.0;
  return adaptive_gl_rec(f, a, b, gl15(f, a, b), tol, 48);
}

// ---------------------------------------------------------------------------
// Spectral representation on the negative axis (delta = gamma = 1):
//   E_alpha(-x) = sin(alpha pi)/(alpha pi)
//       * int_0^inf exp(-(v x)^{1/alpha}) / (v^2 + 2 v cos(alpha pi) + 1) dv.
// Positive integrand, so no cancellation anywhere.
// ---------------------------------------------------------------------------

double spectral_ml_negative(double alpha, double x) {
  const double ca = std::cos(alpha * pi);
  const double inv_alpha = 1.0 / alpha;
  auto integrand = [&](double v) {
    if (v <= 0.0) return 1.0;  // limit at v = 0
    return std::exp(-std::pow(v * x, inv_alpha)) / (v * (v + 2.0 * ca) + 1.0);
  };
  const double w_end = std::max(10.0, 1.5 * std::pow(45.0, alpha) / x);
  const double integral = adaptive_gl(integrand, 0.0, w_end, 1e-15);
  return std::sin(alpha * pi) / (alpha * pi) * integral;
}

void validate_ml_params(const MLParams& p) {
  if (!(p.beta > 0.0) || !std::isfinite(p.beta)) {
    throw std::invalid_argument("Mittag-Leffler order beta must be positive");
  }
  if (!(p.delta >= 0.0) || !std::isfinite(p.delta)) {
    throw std::invalid_argument("Mittag-Leffler exponent delta must be >= 0");
  }
  if (!std::isfinite(p.gamma)) {
    throw std::invalid_argument("Mittag-Leffler parameter gamma must be finite");
  }
}

}  // namespace

double ml(const MLParams& params, double w) {
  validate_ml_params(params);
  if (!std::isfinite(w)) throw std::invalid_argument("Mittag-Leffler argument must be finite");
  if (params.delta == 0.0 || w == 0.0) return rgamma(params.gamma);
  if (params.beta == 1.0 && params.gamma == params.delta) {
    return std::exp(w) * rgamma(params.delta);  // E^d_{1,d}(w) = e^w / Gamma(d)
  }
  if (w <= -50.0) {
    double v;
    if (asymptotic_negative(params, w, &v)) return v;
  }
  if (params.delta == 1.0 && params.gamma == 1.0 && params.beta <= 0.99 && w < -1.0) {
    return spectral_ml_negative(params.beta, -w);
  }
  const SeriesScan scan = scan_series(params, w);
  if (!scan.tractable) {
    throw convergence_error("Mittag-Leffler series peak lies beyond the term budget",
                            0.0, 0);
  }
  if (w > 0.0) {
    if (scan.max_ln > 690.0) return series_mpfr(params, w, scan);  // may round to inf
    return series_double(params, w);
  }
  if (scan.max_ln - scan.first_ln <= 3.0) return series_double(params, w);
  return series_mpfr(params, w, scan);
}

double ml_survival(double alpha, double rate, double t) {
  if (!(alpha > 0.0) || alpha > 1.0) {
    throw std::invalid_argument("ml_survival requires alpha in (0, 1]");
  }
  if (!(rate >= 0.0)) throw std::invalid_argument("ml_survival requires rate >= 0");
  if (!(t >= 0.0)) throw std::invalid_argument("ml_survival requires t >= 0");
  if (t == 0.0 || rate == 0.0) return 1.0;
  if (alpha == 1.0) return std::exp(-rate * t);
  const double value = ml({alpha, 1.0, 1.0}, -rate * std::pow(t, alpha));
  return std::clamp(value, 0.0, 1.0);
}

double rl_fractional_integral(const std::function<double(double)>& f, double alpha,
                              double t, double abs_tol) {
  if (!(alpha > 0.0)) throw std::invalid_argument("fractional integral requires alpha > 0");
  if (!(t >= 0.0) || !std::isfinite(t)) {
    throw std::invalid_argument("fractional integral requires finite t >= 0");
  }
  if (t == 0.0) return 0.0;
  if (alpha == 1.0) return adaptive_gl(f, 0.0, t, abs_tol);
  // Substituting v = (t-y)^alpha removes the kernel singularity:
  //   J^alpha f(t) = (1/Gamma(alpha+1)) int_0^{t^alpha} f(t - v^{1/alpha}) dv.
  const double inv_alpha = 1.0 / alpha;
  auto g = [&](double v) { return f(t - std::pow(v, inv_alpha)); };
  const double scale = std::tgamma(alpha + 1.0);
  return adaptive_gl(g, 0.0, std::pow(t, alpha), abs_tol * scale) / scale;
}

LogMlMoments log_ml_moments(double alpha, double rate) {
  if (!(alpha > 0.0) || alpha > 1.0) {
    throw std::invalid_argument("log_ml_moments requires alpha in (0, 1]");
  }
  if (!(rate > 0.0)) throw std::invalid_argument("log_ml_moments requires rate > 0");
  return {-std::log(rate) / alpha - euler_gamma,
          pi * pi * (1.0 / (3.0 * alpha * alpha) - 1.0 / 6.0)};
}

// ---------------------------------------------------------------------------
// Fractional Poisson weights. Writing n = d-1 and u_M = x^M / Gamma(alpha M + 1),
//   pmf[n] = sum_{M >= n} (-1)^{M-n} C(M, n) u_M,
// so a single u-table serves every n, and sum_n pmf[n] telescopes to u_0 = 1.
// The alternating binomial transform cancels heavily; precision is sized from
// the largest |C(M,n) u_M| encountered.
// ---------------------------------------------------------------------------

namespace {

struct PmfPeak {
  double max_ln;
  double peak_m;
  bool tractable;
};

// max over M >= n of ln( C(M,n) x^M / Gamma(alpha M + 1) ), by incremental scan.
PmfPeak pmf_term_peak(double alpha, double ln_x, long n) {
  double ln_c = 0.0;  // ln C(M, n), starting at M = n
  double best = n * ln_x - lgamma_abs(alpha * n + 1.0);
  double best_m = n;
  for (long m = n + 1; m < n + 4000000; ++m) {
    ln_c += std::log(static_cast<double>(m) / (m - n));
    const double v = ln_c + m * ln_x - lgamma_abs(alpha * m + 1.0);
    if (v > best) {
      best = v;
      best_m = m;
    } else if (v < best - 80.0) {
      return {best, best_m, true};
    }
  }
  return {best, best_m, false};
}

// The table u[M] = x^M / Gamma(alpha M + 1), built multiplicatively so the
// relative error stays at a few ulps of the working precision (the binomial
// transform cancels by many orders of magnitude and would amplify anything
// coarser).
class UTable {
 public:
  UTable(double alpha, double x, mpfr_prec_t prec) : alpha_(alpha) {
    mpfr_inits2(prec, x_, pow_, z_, static_cast<mpfr_ptr>(nullptr));
    mpfr_set_d(x_, x, MPFR_RNDN);
    mpfr_set_ui(pow_, 1, MPFR_RNDN);
    prec_ = prec;
    u_.emplace_back(prec);
    mpfr_set_ui(u_.back().v, 1, MPFR_RNDN);
  }
  ~UTable() { mpfr_clears(x_, pow_, z_, static_cast<mpfr_ptr>(nullptr)); }
  UTable(const UTable&) = delete;
  UTable& operator=(const UTable&) = delete;

  mpfr_srcptr at(std::size_t m) {
    while (u_.size() <= m) {
      const std::size_t next = u_.size();
      mpfr_mul(pow_, pow_, x_, MPFR_RNDN);
      mpfr_set_d(z_, alpha_ * next + 1.0, MPFR_RNDN);
      mpfr_lngamma(z_, z_, MPFR_RNDN);
      mpfr_neg(z_, z_, MPFR_RNDN);
      mpfr_exp(z_, z_, MPFR_RNDN);
      u_.emplace_back(prec_);
      mpfr_mul(u_.back().v, pow_, z_, MPFR_RNDN);
    }
    return u_[m].v;
  }

 private:
  double alpha_;
  mpfr_prec_t prec_;
  mpfr_t x_, pow_, z_;
  std::vector<MpVal> u_;
};

}  // namespace

FractionalPoissonPmf fractional_poisson_pmf(double alpha, double x, double tail_tol,
                                            std::size_t cap) {
  if (!(alpha > 0.0) || alpha > 1.0) {
    throw std::invalid_argument("fractional_poisson_pmf requires alpha in (0, 1]");
  }
  if (!(x >= 0.0) || !std::isfinite(x)) {
    throw std::invalid_argument("fractional_poisson_pmf requires finite x >= 0");
  }
  if (!(tail_tol > 0.0)) throw std::invalid_argument("tail_tol must be positive");
  if (x == 0.0) return {{1.0}, 0.0};

  const double ln_x = std::log(x);
  const double g1 = std::tgamma(alpha + 1.0);
  const double mean = x / g1;
  const double var =
      mean + x * x * std::max(0.0, 2.0 / std::tgamma(2.0 * alpha + 1.0) - 1.0 / (g1 * g1));
  std::size_t budget =
      std::max<std::size_t>(16, static_cast<std::size_t>(mean + 12.0 * std::sqrt(var) + 30.0));

  for (;;) {
    budget = std::min(budget, cap);
    double max_ln = 0.0;
    for (std::size_t n : {std::size_t{0}, budget / 4, budget / 2, 3 * budget / 4, budget}) {
      const PmfPeak pk = pmf_term_peak(alpha, ln_x, static_cast<long>(n));
      if (!pk.tractable) {
        throw convergence_error("fractional Poisson weight series is impractically long",
                                0.0, static_cast<long>(n));
      }
      max_ln = std::max(max_ln, pk.max_ln);
    }
    const double prec_needed = 160.0 + std::max(0.0, max_ln) / ln2;
    if (prec_needed > 32768.0) {
      throw convergence_error(
          "fractional Poisson weights exceed the precision budget (alpha too small "
          "for this x)",
          0.0, 0);
    }
    const mpfr_prec_t prec = static_cast<mpfr_prec_t>(prec_needed);

    UTable u(alpha, x, prec);
    mpfr_t sum, binom, term, thresh;
    mpfr_inits2(prec, sum, binom, term, thresh, static_cast<mpfr_ptr>(nullptr));

    std::vector<double> pmf;
    pmf.reserve(budget + 1);
    double cum = 0.0;
    bool need_restart = false;
    for (std::size_t n = 0;; ++n) {
      if (n > budget) {
        if (budget >= cap) {
          mpfr_clears(sum, binom, term, thresh, static_cast<mpfr_ptr>(nullptr));
          throw convergence_error(
              "fractional Poisson weights did not reach the tail target", cum,
              static_cast<long>(cap));
        }
        budget = std::min(2 * budget, cap);
        need_restart = true;  // precision was sized for the smaller range
        break;
      }
      const PmfPeak pk = pmf_term_peak(alpha, ln_x, static_cast<long>(n));
      mpfr_set_d(thresh, pk.max_ln, MPFR_RNDN);
      mpfr_exp(thresh, thresh, MPFR_RNDN);
      mpfr_mul_2si(thresh, thresh, -(prec - 8), MPFR_RNDN);

      mpfr_set_zero(sum, 1);
      mpfr_set_ui(binom, 1, MPFR_RNDN);
      int small = 0;
      for (std::size_t m = n;; ++m) {
        mpfr_mul(term, binom, u.at(m), MPFR_RNDN);
        if ((m - n) % 2 == 0) {
          mpfr_add(sum, sum, term, MPFR_RNDN);
        } else {
          mpfr_sub(sum, sum, term, MPFR_RNDN);
        }
        if (static_cast<double>(m) > pk.peak_m && mpfr_cmpabs(term, thresh) < 0) {
          if (++small >= 3) break;
        } else {
          small = 0;
        }
        mpfr_mul_ui(binom, binom, static_cast<unsigned long>(m + 1), MPFR_RNDN);
        mpfr_div_ui(binom, binom, static_cast<unsigned long>(m + 1 - n), MPFR_RNDN);
      }
      double g = mpfr_get_d(sum, MPFR_RNDN);
      g = std::clamp(g, 0.0, 1.0);
      pmf.push_back(g);
      cum += g;
      if (1.0 - cum < tail_tol) break;
    }
    mpfr_clears(sum, binom, term, thresh, static_cast<mpfr_ptr>(nullptr));
    if (!need_restart) {
      return {std::move(pmf), std::max(0.0, 1.0 - cum)};
    }
  }
}

}  // namespace fracq::specfun
