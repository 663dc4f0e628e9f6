#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "fracq/specfun.hpp"

namespace fracq::rng {

// Seedable xoshiro256++ stream. Identical (seed, stream_id) pairs reproduce
// bitwise-identical sequences; distinct stream_ids give statistically
// independent substreams, so Monte Carlo replicates can be fanned out without
// coordination. Single-owner: never share one stream across threads.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0);

  std::uint64_t next_u64();

  // Uniform on the open interval (0, 1); never returns an endpoint.
  double uniform01() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double exponential(double rate) { return -std::log(uniform01()) / rate; }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

 private:
  std::uint64_t state_[4];
  std::uint64_t seed_;
  std::uint64_t stream_id_;
};

// One-sided alpha-stable variate standardized to E exp(-xi T) = exp(-xi^alpha),
// by the Kanter construction. alpha = 1 degenerates to the constant 1.
template <class Stream>
double sample_stable(Stream& stream, double alpha) {
  if (!(alpha > 0.0) || alpha > 1.0) {
    throw std::invalid_argument("sample_stable requires alpha in (0, 1]");
  }
  if (alpha == 1.0) return 1.0;
  const double u = stream.uniform01();
  const double e = stream.exponential(1.0);
  const double pi_u = specfun::pi * u;
  // ln T = (1-a)/a ln sin((1-a)pi u) + ln sin(a pi u) - (1/a) ln sin(pi u)
  //        - (1-a)/a ln E, kept in logs so alpha near 1 cannot overflow.
  const double ratio = (1.0 - alpha) / alpha;
  const double ln_t = ratio * std::log(std::sin((1.0 - alpha) * pi_u)) +
                      std::log(std::sin(alpha * pi_u)) -
                      std::log(std::sin(pi_u)) / alpha - ratio * std::log(e);
  return std::exp(ln_t);
}

// Mittag-Leffler sojourn time S = E^{1/alpha} T_alpha with E ~ Exp(rate);
// its survival function is E_{alpha,1}(-rate t^alpha).
template <class Stream>
double sample_ml_sojourn(Stream& stream, double alpha, double rate) {
  if (!(alpha > 0.0) || alpha > 1.0) {
    throw std::invalid_argument("sample_ml_sojourn requires alpha in (0, 1]");
  }
  if (!(rate > 0.0)) throw std::invalid_argument("sample_ml_sojourn requires rate > 0");
  const double e = stream.exponential(rate);
  if (alpha == 1.0) return e;
  return std::pow(e, 1.0 / alpha) * sample_stable(stream, alpha);
}

// One draw from the one-dimensional law of the inverse stable subordinator,
// E^alpha(t) =d (t / T_alpha)^alpha. Used as the subordination oracle.
template <class Stream>
double sample_inverse_subordinator(Stream& stream, double alpha, double t) {
  if (!(alpha > 0.0) || alpha > 1.0) {
    throw std::invalid_argument("sample_inverse_subordinator requires alpha in (0, 1]");
  }
  if (!(t >= 0.0)) throw std::invalid_argument("sample_inverse_subordinator requires t >= 0");
  if (t == 0.0) return 0.0;
  if (alpha == 1.0) return t;
  return std::pow(t / sample_stable(stream, alpha), alpha);
}

}  // namespace fracq::rng
