#pragma once

#include <vector>

namespace phibe {

/// Weights a_1..a_i of the i-th order forward-difference drift estimator.
///
/// They satisfy sum_j a_j j^k = [k == 1] for k = 1..i, so that
/// (1/dt) sum_j a_j (s(j dt) - s(0)) reproduces s'(0) up to O(dt^i).
struct OrderCoefficients {
  int order = 0;
  std::vector<double> coeffs;
};

/// Solves the i x i Vandermonde system A_kj = j^k, b = e_1 by partially
/// pivoted elimination. Results are cached per order; safe to call from
/// multiple threads.
///
/// Throws Error(kInvalidArgument) for order < 1 or order > kMaxOrder and
/// Error(kNumerical) if the system is numerically singular.
const OrderCoefficients& bellman_order_coefficients(int order);

/// C_i = (sum_j |a_j| j^{i+1}) / (i+1)!
double error_constant(int order);

inline constexpr int kMaxOrder = 12;

}  // namespace phibe
