#pragma once

// Test-only oracles, kept independent of the implementation paths they check.

#include <vector>

#include "fracq/sim.hpp"

namespace fracq::test_oracles {

// Solves the truncated classical (alpha = 1) Kolmogorov system
//   p_0' = -lambda p_0 + mu p_1,
//   p_k' = -(lambda+mu) p_k + lambda p_{k-1} + mu p_{k+1},  1 <= k < K,
// with p_k(0) = delta_{k,i}, by adaptive Dormand-Prince RK5(4). Returns the
// state vector at each requested time (times must be increasing).
std::vector<std::vector<double>> solve_truncated_kolmogorov(
    const sim::ModelParams& params, const std::vector<double>& times,
    std::size_t truncation = 500, double tol = 1e-12);

}  // namespace fracq::test_oracles
