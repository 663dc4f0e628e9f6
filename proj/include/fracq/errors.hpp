#pragma once

#include <stdexcept>
#include <string>

namespace fracq {

// A series or iterative scheme failed to settle within its budget. Carries the
// partial result and the number of terms consumed so callers can diagnose.
class convergence_error : public std::runtime_error {
 public:
  convergence_error(const std::string& what, double partial_sum, long terms_used)
      : std::runtime_error(what), partial_sum_(partial_sum), terms_used_(terms_used) {}

  double partial_sum() const noexcept { return partial_sum_; }
  long terms_used() const noexcept { return terms_used_; }

 private:
  double partial_sum_;
  long terms_used_;
};

// Parameter combination the formulas do not cover (e.g. lambda == mu).
class unsupported_parameter_error : public std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Input data carries no usable signal (zero variance, all-tied values, ...).
class degenerate_data_error : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Design matrix (or equivalent) is singular for the requested fit.
class ill_conditioned_error : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace fracq
