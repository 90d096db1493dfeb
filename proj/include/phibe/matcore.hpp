#pragma once

#include <Eigen/Dense>

// Dense small-matrix numerics shared by the environments and the oracles.
// Everything here is a pure function; dimensions are expected to be small
// (d <= 8), so Kronecker-product Lyapunov solves are acceptable.
namespace phibe {

/// e^{M t} by scaling and squaring of a truncated Taylor series.
Eigen::MatrixXd mat_exp(const Eigen::MatrixXd& m, double t);

/// (1/t) * int_0^t e^{M tau} d tau, read off an augmented exponential so that
/// singular M is fine. Requires t > 0.
Eigen::MatrixXd phi1(const Eigen::MatrixXd& m, double t);

/// C_A = (1/dt) * int_0^dt e^{A s} e^{A^T s} ds (Van Loan block construction).
Eigen::MatrixXd gram_integral(const Eigen::MatrixXd& a, double dt);

/// Negative definite P with beta P = Q - P B R^{-1} B^T P + A^T P + P A.
///
/// Q and R must be symmetric negative definite. Solved by Newton-Kleinman on
/// the negated (positive definite) equation for A - beta/2 I.
Eigen::MatrixXd solve_care(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                           const Eigen::MatrixXd& q, const Eigen::MatrixXd& r,
                           double beta);

/// Frobenius norm of beta P - (Q - P B R^{-1} B^T P + A^T P + P A).
double care_residual(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                     const Eigen::MatrixXd& q, const Eigen::MatrixXd& r,
                     double beta, const Eigen::MatrixXd& p);

/// Symmetric P with beta P = M + F^T P + P F: the quadratic coefficient of the
/// value of a linear policy with closed loop F and running reward s^T M s.
/// Throws Error(kNumerical, "unstable closed loop") unless
/// beta - 2 max Re lambda(F) > 0.
Eigen::MatrixXd solve_policy_lyapunov(const Eigen::MatrixXd& f,
                                      const Eigen::MatrixXd& m, double beta);

/// X with F^T X + X F + M = 0.
Eigen::MatrixXd solve_continuous_lyapunov(const Eigen::MatrixXd& f,
                                          const Eigen::MatrixXd& m);

/// X with X = F^T X F + M.
Eigen::MatrixXd solve_discrete_lyapunov(const Eigen::MatrixXd& f,
                                        const Eigen::MatrixXd& m);

/// Hautus test on A - beta/2 I: rank [lambda I - A', B] = d for every
/// eigenvalue with nonnegative real part.
bool hautus_stabilizable(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                         double beta);

/// Detectability of (A - beta/2 I, Q), i.e. stabilizability of the transpose.
bool hautus_detectable(const Eigen::MatrixXd& a, const Eigen::MatrixXd& q,
                       double beta);

/// max Re lambda(M).
double spectral_abscissa(const Eigen::MatrixXd& m);

/// max |lambda(M)|.
double spectral_radius(const Eigen::MatrixXd& m);

inline Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& m) {
  return 0.5 * (m + m.transpose());
}

bool is_symmetric(const Eigen::MatrixXd& m, double tol = 1e-10);

/// True when the symmetric part of M is negative definite.
bool is_negative_definite(const Eigen::MatrixXd& m);

}  // namespace phibe
