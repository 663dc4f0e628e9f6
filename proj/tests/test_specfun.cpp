#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fracq/specfun.hpp"

using namespace fracq;
using specfun::MLParams;
using specfun::ml;

namespace {

double rel_err(double got, double want) {
  return std::abs(got - want) / std::abs(want);
}

}  // namespace

TEST_CASE("constants carry at least 12 correct digits") {
  CHECK(rel_err(specfun::euler_gamma, 0.57721566490153286061) < 1e-15);
  CHECK(rel_err(specfun::zeta3, 1.2020569031595942854) < 1e-15);
  CHECK(rel_err(specfun::pi, 3.14159265358979323846) < 1e-15);
}

TEST_CASE("ml parameter validation") {
  CHECK_THROWS_AS(ml({0.0, 1.0, 1.0}, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(ml({-0.5, 1.0, 1.0}, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(ml({0.5, 1.0, -1.0}, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(ml({0.5, 1.0, 1.0}, std::nan("")), std::invalid_argument);
}

TEST_CASE("ml closed-form reductions") {
  // E^d_{1,d}(w) = e^w / Gamma(d); with d = 2, w = 0.7 this is the classical e^w
  // scaled by Gamma(2) = 1.
  CHECK(rel_err(ml({1.0, 2.0, 2.0}, 0.7), 2.0137527074704765216) < 1e-13);
  CHECK(ml({1.0, 1.0, 1.0}, 0.0) == 1.0);
  // delta = 0 leaves only the r = 0 term.
  CHECK(rel_err(ml({0.7, 2.0, 0.0}, 5.0), 1.0) < 1e-14);
  // E_{1,3}(2) = (e^2 - 3) / 4.
  CHECK(rel_err(ml({1.0, 3.0, 1.0}, 2.0), 1.0972640247326625568) < 1e-13);
}

TEST_CASE("ml high-precision series anchors") {
  CHECK(rel_err(ml({0.5, 0.5, 1.0}, -1.0), 0.13660600739194928254) < 1e-12);
  CHECK(rel_err(ml({0.5, 2.0, 1.0}, 2.0), 26.421036513946736816) < 1e-13);
  CHECK(rel_err(ml({0.6, 1.0, 1.0}, -1.0), 0.4133273409431062974) < 1e-12);
  // Two-parameter Prabhakar values with genuine cancellation.
  CHECK(rel_err(ml({0.6, 1.2, 2.0}, -3.0), 0.019694668489066653026) < 1e-12);
  CHECK(rel_err(ml({0.5, 2.5, 5.0}, -8.0), 4.6069730517647431971e-6) < 1e-11);
  CHECK(rel_err(ml({0.7, 1.0, 3.0}, -60.0), 3.9548552939728698625e-7) < 1e-10);
  CHECK(rel_err(ml({0.6, 1.2, 2.0}, -49.0), 4.7008418292802221023e-6) < 1e-10);
}

TEST_CASE("ml negative-axis anchors across the dispatch regions") {
  CHECK(rel_err(ml({0.3, 1.0, 1.0}, -5.0), 0.13708086902027063889) < 1e-12);
  CHECK(rel_err(ml({0.6, 1.0, 1.0}, -20.0), 0.022946564273258376396) < 1e-12);
  CHECK(rel_err(ml({0.6, 1.0, 1.0}, -49.0), 0.0092704958019852062758) < 1e-12);
  CHECK(rel_err(ml({0.9, 1.0, 1.0}, -49.0), 0.0022213493680312167925) < 1e-12);
  CHECK(rel_err(ml({0.95, 1.0, 1.0}, -30.0), 0.0018277746789235501102) < 1e-12);
  CHECK(rel_err(ml({0.1, 1.0, 1.0}, -2.0), 0.32001533595972739937) < 1e-12);
}

TEST_CASE("ml matches exp(x^2) erfc(x) at alpha = 1/2") {
  for (double x : {0.3, 1.0, 3.0, 7.0, 20.0, 45.0, 80.0, 200.0}) {
    const double want = x <= 20.0
                            ? std::exp(x * x) * std::erfc(x)
                            // e^{x^2} overflows; use the asymptotic erfc form
                            // erfc(x) e^{x^2} = (1/(x sqrt(pi))) (1 - 1/(2x^2) + 3/(4x^4) - ...)
                            : (1.0 - 0.5 / (x * x) + 0.75 / (x * x * x * x) -
                               1.875 / std::pow(x, 6.0) + 6.5625 / std::pow(x, 8.0)) /
                                  (x * std::sqrt(specfun::pi));
    CHECK(rel_err(ml({0.5, 1.0, 1.0}, -x * x), want) < 1e-11);
  }
}

TEST_CASE("ml equals exp on [-30, 30] for beta = gamma = delta = 1") {
  for (double w = -30.0; w <= 30.0; w += 2.5) {
    CHECK(rel_err(ml({1.0, 1.0, 1.0}, w), std::exp(w)) < 1e-12);
  }
}

TEST_CASE("ml is completely monotone on the negative axis") {
  for (double alpha : {0.3, 0.6, 0.9}) {
    double prev = 1.0;
    for (double x = 0.25; x <= 60.0; x *= 1.5) {
      const double v = ml({alpha, 1.0, 1.0}, -x);
      CHECK(v >= 0.0);
      CHECK(v <= prev + 1e-14);
      prev = v;
    }
  }
}

TEST_CASE("ml agreement between asymptotic and spectral routes near w = -50") {
  // -49 dispatches to the spectral integral, -50.5 to the asymptotic series;
  // both must describe the same smooth function.
  for (double alpha : {0.2, 0.5, 0.8}) {
    const double left = ml({alpha, 1.0, 1.0}, -49.9);
    const double right = ml({alpha, 1.0, 1.0}, -50.1);
    CHECK(rel_err(left, right) < 0.01);
    CHECK(left > right);
  }
}

TEST_CASE("ml diagnostic error for an impractical series") {
  CHECK_THROWS_AS(ml({0.05, 1.0, 2.0}, -49.0), convergence_error);
}

TEST_CASE("ml_survival") {
  CHECK(rel_err(specfun::ml_survival(1.0, 2.0, 1.0), std::exp(-2.0)) < 1e-14);
  CHECK(specfun::ml_survival(0.6, 1.0, 0.0) == 1.0);
  // E_{0.6}(-3^{0.6})
  CHECK(rel_err(specfun::ml_survival(0.6, 1.0, 3.0), 0.24299048303864794508) < 1e-12);
  CHECK_THROWS_AS(specfun::ml_survival(1.2, 1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(specfun::ml_survival(0.0, 1.0, 1.0), std::invalid_argument);

  SUBCASE("maps into [0,1] and is non-increasing in t") {
    for (double alpha : {0.3, 0.6, 0.9, 1.0}) {
      double prev = 1.0;
      for (double t = 0.0; t <= 40.0; t += 0.5) {
        const double s = specfun::ml_survival(alpha, 1.7, t);
        CHECK(s >= 0.0);
        CHECK(s <= 1.0);
        CHECK(s <= prev + 1e-13);
        prev = s;
      }
    }
  }
}

TEST_CASE("fractional integral") {
  using specfun::rl_fractional_integral;
  auto one = [](double) { return 1.0; };
  auto zero = [](double) { return 0.0; };
  auto identity = [](double y) { return y; };

  // J^{1/2} 1 at t = 1 is t^{1/2}/Gamma(3/2) = 2/sqrt(pi).
  CHECK(rel_err(rl_fractional_integral(one, 0.5, 1.0), 1.1283791670955125739) < 1e-10);
  CHECK(rl_fractional_integral(zero, 0.7, 3.0) == 0.0);
  CHECK(rl_fractional_integral(one, 0.5, 0.0) == 0.0);
  // J^{1/2} y at t = 1 is Gamma(2)/Gamma(2.5).
  CHECK(rel_err(rl_fractional_integral(identity, 0.5, 1.0), 0.75225277806367504926) < 1e-9);
  // alpha = 1 reduces to the plain integral.
  CHECK(rel_err(rl_fractional_integral([](double y) { return std::cos(y); }, 1.0, 2.0),
                std::sin(2.0)) < 1e-10);
  CHECK_THROWS_AS(rl_fractional_integral(one, 0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(rl_fractional_integral(one, -1.0, 1.0), std::invalid_argument);

  SUBCASE("linearity") {
    auto f = [](double y) { return std::exp(-y); };
    auto g = [](double y) { return y * y; };
    auto combo = [&](double y) { return 2.0 * f(y) - 3.0 * g(y); };
    const double lhs = rl_fractional_integral(combo, 0.6, 2.0);
    const double rhs = 2.0 * rl_fractional_integral(f, 0.6, 2.0) -
                       3.0 * rl_fractional_integral(g, 0.6, 2.0);
    CHECK(std::abs(lhs - rhs) < 1e-9);
  }

  SUBCASE("power-law identity J^a y^p = Gamma(p+1)/Gamma(p+1+a) t^{p+a}") {
    const double a = 0.3, p = 2.0, t = 1.7;
    const double want =
        std::tgamma(p + 1.0) / std::tgamma(p + 1.0 + a) * std::pow(t, p + a);
    const double got =
        rl_fractional_integral([p](double y) { return std::pow(y, p); }, a, t);
    CHECK(rel_err(got, want) < 1e-9);
  }
}

TEST_CASE("log-sojourn moments") {
  const auto m1 = specfun::log_ml_moments(1.0, 1.0);
  CHECK(m1.mean == -specfun::euler_gamma);
  CHECK(rel_err(m1.variance, 1.6449340668482264365) < 1e-15);

  const auto m2 = specfun::log_ml_moments(0.5, 1.0);
  CHECK(rel_err(m2.variance, 11.514538467937585055) < 1e-14);

  const auto m3 = specfun::log_ml_moments(0.25, 7.0);
  CHECK(rel_err(m3.mean, -8.360856261122786081) < 1e-13);

  CHECK_THROWS_AS(specfun::log_ml_moments(0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(specfun::log_ml_moments(0.5, 0.0), std::invalid_argument);
}

TEST_CASE("fractional Poisson weights") {
  using specfun::fractional_poisson_pmf;

  SUBCASE("x = 0 is the unit mass") {
    const auto w = fractional_poisson_pmf(0.6, 0.0, 1e-12);
    REQUIRE(w.pmf.size() == 1);
    CHECK(w.pmf[0] == 1.0);
  }

  SUBCASE("alpha = 1 reduces to the Poisson law") {
    for (double x : {0.3, 4.0, 12.0}) {
      const auto w = fractional_poisson_pmf(1.0, x, 1e-13);
      double pois = std::exp(-x);
      for (std::size_t n = 0; n < std::min<std::size_t>(w.pmf.size(), 30); ++n) {
        CHECK(std::abs(w.pmf[n] - pois) < 1e-13);
        pois *= x / static_cast<double>(n + 1);
      }
    }
  }

  SUBCASE("normalizes and stays non-negative") {
    // Feasible (alpha, x) envelope: the required precision grows like
    // exp(ln(x)/alpha), so small alpha is paired with smaller x.
    const std::vector<std::pair<double, std::vector<double>>> grid = {
        {0.3, {0.5, 3.94, 8.0}},
        {0.6, {0.5, 3.94, 15.0, 23.8}},
        {0.9, {0.5, 3.94, 15.0, 23.8}},
    };
    for (const auto& [alpha, xs] : grid) {
      for (double x : xs) {
        const auto w = fractional_poisson_pmf(alpha, x, 1e-12);
        double sum = 0.0;
        for (double g : w.pmf) {
          CHECK(g >= 0.0);
          sum += g;
        }
        CHECK(sum >= 1.0 - 1e-11);
        CHECK(sum <= 1.0 + 1e-11);
        CHECK(w.tail <= 1e-12 * 1.0001 + 1e-15);
      }
    }
  }

  SUBCASE("diagnostic error when the cancellation exceeds the precision budget") {
    CHECK_THROWS_AS(fractional_poisson_pmf(0.3, 23.8, 1e-12), convergence_error);
  }

  SUBCASE("first weight equals the Mittag-Leffler survival function") {
    const double alpha = 0.6, theta = 1.5, t = 2.0;
    const double x = theta * std::pow(t, alpha);
    const auto w = fractional_poisson_pmf(alpha, x, 1e-12);
    CHECK(rel_err(w.pmf[0], specfun::ml_survival(alpha, theta, t)) < 1e-11);
  }

  SUBCASE("diagnostic error when the cap cuts the tail") {
    CHECK_THROWS_AS(fractional_poisson_pmf(0.7, 30.0, 1e-12, 5), convergence_error);
  }
}
