#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fracq::test_oracles {
namespace {

void derivative(const sim::ModelParams& p, const std::vector<double>& y,
                std::vector<double>& dy) {
  const std::size_t k_max = y.size() - 1;
  const double lam = p.lambda, mu = p.mu, theta = lam + mu;
  dy[0] = -lam * y[0] + mu * y[1];
  for (std::size_t k = 1; k < k_max; ++k) {
    dy[k] = -theta * y[k] + lam * y[k - 1] + mu * y[k + 1];
  }
  dy[k_max] = -theta * y[k_max] + lam * y[k_max - 1];
}

}  // namespace

std::vector<std::vector<double>> solve_truncated_kolmogorov(
    const sim::ModelParams& params, const std::vector<double>& times,
    std::size_t truncation, double tol) {
  params.validate();
  if (times.empty()) return {};
  if (static_cast<std::size_t>(params.initial_state) >= truncation) {
    throw std::invalid_argument("initial state beyond truncation");
  }

  // Dormand-Prince 5(4) tableau (autonomous system, so the c nodes drop out).
  static const double a21 = 1.0 / 5;
  static const double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static const double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static const double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                      a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static const double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                      a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static const double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                      b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static const double e1 = 35.0 / 384 - 5179.0 / 57600, e3 = 500.0 / 1113 - 7571.0 / 16695,
                      e4 = 125.0 / 192 - 393.0 / 640, e5 = -2187.0 / 6784 + 92097.0 / 339200,
                      e6 = 11.0 / 84 - 187.0 / 2100, e7 = -1.0 / 40;

  const std::size_t dim = truncation;
  std::vector<double> y(dim, 0.0);
  y[static_cast<std::size_t>(params.initial_state)] = 1.0;
  std::vector<double> k1(dim), k2(dim), k3(dim), k4(dim), k5(dim), k6(dim), k7(dim),
      tmp(dim), y5(dim);

  std::vector<std::vector<double>> snapshots;
  snapshots.reserve(times.size());

  double t = 0.0;
  double h = 1e-3;
  std::size_t next_time = 0;
  while (next_time < times.size() && times[next_time] <= 0.0) {
    snapshots.push_back(y);
    ++next_time;
  }

  const double t_end = times.back();
  long guard = 0;
  while (t < t_end && next_time < times.size()) {
    if (++guard > 50000000L) throw std::runtime_error("ODE oracle step guard tripped");
    bool hit_snapshot = false;
    double step = h;
    if (t + step >= times[next_time]) {
      step = times[next_time] - t;
      hit_snapshot = true;
    }

    derivative(params, y, k1);
    for (std::size_t j = 0; j < dim; ++j) tmp[j] = y[j] + step * a21 * k1[j];
    derivative(params, tmp, k2);
    for (std::size_t j = 0; j < dim; ++j) tmp[j] = y[j] + step * (a31 * k1[j] + a32 * k2[j]);
    derivative(params, tmp, k3);
    for (std::size_t j = 0; j < dim; ++j)
      tmp[j] = y[j] + step * (a41 * k1[j] + a42 * k2[j] + a43 * k3[j]);
    derivative(params, tmp, k4);
    for (std::size_t j = 0; j < dim; ++j)
      tmp[j] = y[j] + step * (a51 * k1[j] + a52 * k2[j] + a53 * k3[j] + a54 * k4[j]);
    derivative(params, tmp, k5);
    for (std::size_t j = 0; j < dim; ++j)
      tmp[j] = y[j] +
               step * (a61 * k1[j] + a62 * k2[j] + a63 * k3[j] + a64 * k4[j] + a65 * k5[j]);
    derivative(params, tmp, k6);
    for (std::size_t j = 0; j < dim; ++j)
      y5[j] = y[j] +
              step * (b1 * k1[j] + b3 * k3[j] + b4 * k4[j] + b5 * k5[j] + b6 * k6[j]);
    derivative(params, y5, k7);

    double err = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      const double ej = step * (e1 * k1[j] + e3 * k3[j] + e4 * k4[j] + e5 * k5[j] +
                                e6 * k6[j] + e7 * k7[j]);
      err = std::max(err, std::abs(ej) / (tol + tol * std::abs(y5[j])));
    }

    if (err <= 1.0) {
      t += step;
      y.swap(y5);
      if (hit_snapshot && std::abs(t - times[next_time]) < 1e-14 * std::max(1.0, t)) {
        snapshots.push_back(y);
        ++next_time;
      }
    }
    const double scale = err > 0.0 ? 0.9 * std::pow(err, -0.2) : 4.0;
    h = std::clamp(step * std::clamp(scale, 0.2, 4.0), 1e-10, 0.25);
  }
  while (next_time < times.size()) {
    snapshots.push_back(y);
    ++next_time;
  }
  return snapshots;
}

}  // namespace fracq::test_oracles
