#include "phibe/matcore.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <string>

#include "phibe/error.hpp"

namespace phibe {
namespace {

void require_finite(const Eigen::MatrixXd& m, const char* who) {
  if (!m.allFinite()) {
    fail_argument(std::string(who) + ": non-finite input");
  }
}

void require_square(const Eigen::MatrixXd& m, const char* who) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    fail_argument(std::string(who) + ": expected a nonempty square matrix");
  }
}

// Kronecker product; Eigen's unsupported module has one but it is not worth
// the extra include path for a few lines.
Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

Eigen::MatrixXd solve_vectorized(const Eigen::MatrixXd& op,
                                 const Eigen::MatrixXd& rhs, Eigen::Index n,
                                 const char* who) {
  Eigen::FullPivLU<Eigen::MatrixXd> lu(op);
  if (!lu.isInvertible() || lu.rcond() < 1e-14) {
    fail_numerical(std::string(who) + ": singular Lyapunov operator");
  }
  Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(rhs.data(), rhs.size());
  Eigen::VectorXd x = lu.solve(v);
  Eigen::MatrixXd out = Eigen::Map<Eigen::MatrixXd>(x.data(), n, n);
  if (!out.allFinite()) {
    fail_numerical(std::string(who) + ": non-finite solution");
  }
  return out;
}

bool hautus_rank_ok(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const Eigen::Index n = a.rows();
  Eigen::EigenSolver<Eigen::MatrixXd> es(a, false);
  if (es.info() != Eigen::Success) {
    return false;
  }
  const double scale = std::max({1.0, a.norm(), b.norm()});
  for (Eigen::Index k = 0; k < n; ++k) {
    const std::complex<double> lambda = es.eigenvalues()(k);
    // Modes strictly in the open left half plane need no test.
    if (lambda.real() < -1e-12 * scale) {
      continue;
    }
    Eigen::MatrixXcd pencil(n, n + b.cols());
    pencil.leftCols(n) = lambda * Eigen::MatrixXcd::Identity(n, n) -
                         a.cast<std::complex<double>>();
    pencil.rightCols(b.cols()) = b.cast<std::complex<double>>();
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(pencil);
    const auto& sv = svd.singularValues();
    if (sv.size() < n || sv(n - 1) <= 1e-10 * scale) {
      return false;
    }
  }
  return true;
}

}  // namespace

Eigen::MatrixXd mat_exp(const Eigen::MatrixXd& m, double t) {
  require_square(m, "mat_exp");
  require_finite(m, "mat_exp");
  if (!std::isfinite(t)) {
    fail_argument("mat_exp: non-finite time");
  }
  const Eigen::Index n = m.rows();
  Eigen::MatrixXd x = m * t;
  const double norm = x.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm > 0.5) {
    squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
    x /= std::ldexp(1.0, squarings);
  }
  Eigen::MatrixXd sum = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd term = Eigen::MatrixXd::Identity(n, n);
  for (int k = 1; k < 40; ++k) {
    term = term * x / static_cast<double>(k);
    sum += term;
    if (term.norm() <= 1e-16 * sum.norm()) {
      break;
    }
  }
  for (int s = 0; s < squarings; ++s) {
    sum = sum * sum;
    if (!sum.allFinite()) {
      break;
    }
  }
  if (!sum.allFinite()) {
    fail_numerical("mat_exp: overflow (||M t||_1 = " + std::to_string(norm) + ")");
  }
  return sum;
}

Eigen::MatrixXd phi1(const Eigen::MatrixXd& m, double t) {
  require_square(m, "phi1");
  if (!(t > 0.0)) {
    fail_argument("phi1: t must be positive");
  }
  const Eigen::Index n = m.rows();
  // exp([[M, I], [0, 0]] t) has int_0^t e^{M tau} d tau in its upper right.
  Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  aug.topLeftCorner(n, n) = m;
  aug.topRightCorner(n, n).setIdentity();
  const Eigen::MatrixXd e = mat_exp(aug, t);
  return e.topRightCorner(n, n) / t;
}

Eigen::MatrixXd gram_integral(const Eigen::MatrixXd& a, double dt) {
  require_square(a, "gram_integral");
  if (!(dt > 0.0)) {
    fail_argument("gram_integral: dt must be positive");
  }
  const Eigen::Index n = a.rows();
  // Van Loan: exp([[-A, I], [0, A^T]] dt) = [[F11, F12], [0, F22]] with
  // F22 = e^{A^T dt} and F22^T F12 = int_0^dt e^{A s} e^{A^T s} ds.
  Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  aug.topLeftCorner(n, n) = -a;
  aug.topRightCorner(n, n).setIdentity();
  aug.bottomRightCorner(n, n) = a.transpose();
  const Eigen::MatrixXd e = mat_exp(aug, dt);
  Eigen::MatrixXd c =
      e.bottomRightCorner(n, n).transpose() * e.topRightCorner(n, n) / dt;
  c = symmetrized(c);
  if (!c.allFinite()) {
    fail_numerical("gram_integral: non-finite result");
  }
  return c;
}

double spectral_abscissa(const Eigen::MatrixXd& m) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(m, false);
  if (es.info() != Eigen::Success) {
    fail_numerical("spectral_abscissa: eigenvalue solver failed");
  }
  return es.eigenvalues().real().maxCoeff();
}

double spectral_radius(const Eigen::MatrixXd& m) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(m, false);
  if (es.info() != Eigen::Success) {
    fail_numerical("spectral_radius: eigenvalue solver failed");
  }
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

bool is_symmetric(const Eigen::MatrixXd& m, double tol) {
  if (m.rows() != m.cols()) {
    return false;
  }
  return (m - m.transpose()).cwiseAbs().maxCoeff() <=
         tol * std::max(1.0, m.cwiseAbs().maxCoeff());
}

bool is_negative_definite(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    return false;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrized(m),
                                                    Eigen::EigenvaluesOnly);
  return es.info() == Eigen::Success && es.eigenvalues().maxCoeff() < 0.0;
}

Eigen::MatrixXd solve_continuous_lyapunov(const Eigen::MatrixXd& f,
                                          const Eigen::MatrixXd& m) {
  require_square(f, "solve_continuous_lyapunov");
  if (m.rows() != f.rows() || m.cols() != f.cols()) {
    fail_argument("solve_continuous_lyapunov: dimension mismatch");
  }
  const Eigen::Index n = f.rows();
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
  // Column-major vec: vec(F^T X) = (I kron F^T) vec X, vec(X F) = (F^T kron I) vec X.
  const Eigen::MatrixXd op = kron(id, f.transpose()) + kron(f.transpose(), id);
  return symmetrized(
      solve_vectorized(op, -m, n, "solve_continuous_lyapunov"));
}

Eigen::MatrixXd solve_discrete_lyapunov(const Eigen::MatrixXd& f,
                                        const Eigen::MatrixXd& m) {
  require_square(f, "solve_discrete_lyapunov");
  if (m.rows() != f.rows() || m.cols() != f.cols()) {
    fail_argument("solve_discrete_lyapunov: dimension mismatch");
  }
  const Eigen::Index n = f.rows();
  const Eigen::MatrixXd op = Eigen::MatrixXd::Identity(n * n, n * n) -
                             kron(f.transpose(), f.transpose());
  return symmetrized(solve_vectorized(op, m, n, "solve_discrete_lyapunov"));
}

Eigen::MatrixXd solve_policy_lyapunov(const Eigen::MatrixXd& f,
                                      const Eigen::MatrixXd& m, double beta) {
  require_square(f, "solve_policy_lyapunov");
  require_finite(f, "solve_policy_lyapunov");
  require_finite(m, "solve_policy_lyapunov");
  if (!(beta >= 0.0)) {
    fail_argument("solve_policy_lyapunov: beta must be nonnegative");
  }
  if (!is_symmetric(m)) {
    fail_argument("solve_policy_lyapunov: M must be symmetric");
  }
  const Eigen::Index n = f.rows();
  const Eigen::MatrixXd shifted = f - 0.5 * beta * Eigen::MatrixXd::Identity(n, n);
  if (!(spectral_abscissa(shifted) < 0.0)) {
    fail_numerical("unstable closed loop: beta - 2 max Re lambda(F) <= 0");
  }
  return solve_continuous_lyapunov(shifted, m);
}

bool hautus_stabilizable(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                         double beta) {
  if (a.rows() != a.cols() || b.rows() != a.rows() || !a.allFinite() ||
      !b.allFinite()) {
    return false;
  }
  const Eigen::MatrixXd shifted =
      a - 0.5 * beta * Eigen::MatrixXd::Identity(a.rows(), a.cols());
  return hautus_rank_ok(shifted, b);
}

bool hautus_detectable(const Eigen::MatrixXd& a, const Eigen::MatrixXd& q,
                       double beta) {
  if (q.cols() != a.rows()) {
    return false;
  }
  return hautus_stabilizable(a.transpose(), q.transpose(), beta);
}

double care_residual(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                     const Eigen::MatrixXd& q, const Eigen::MatrixXd& r,
                     double beta, const Eigen::MatrixXd& p) {
  const Eigen::MatrixXd rinv_bt = r.ldlt().solve(b.transpose());
  const Eigen::MatrixXd rhs =
      q - p * b * rinv_bt * p + a.transpose() * p + p * a;
  return (beta * p - rhs).norm();
}

Eigen::MatrixXd solve_care(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                           const Eigen::MatrixXd& q, const Eigen::MatrixXd& r,
                           double beta) {
  require_square(a, "solve_care");
  require_square(q, "solve_care");
  require_square(r, "solve_care");
  const Eigen::Index n = a.rows();
  if (b.rows() != n || q.rows() != n || r.rows() != b.cols()) {
    fail_argument("solve_care: dimension mismatch");
  }
  for (const auto* m : {&a, &b, &q, &r}) {
    require_finite(*m, "solve_care");
  }
  if (!(beta >= 0.0)) {
    fail_argument("solve_care: beta must be nonnegative");
  }
  if (!is_symmetric(q) || !is_symmetric(r)) {
    fail_argument("solve_care: Q and R must be symmetric");
  }
  if (!is_negative_definite(q)) {
    fail_argument("solve_care: Q must be negative definite");
  }

  // Negated standard form: Abar^T X + X Abar - X B Rp^{-1} B^T X + Qp = 0.
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd abar = a - 0.5 * beta * id;
  const Eigen::MatrixXd qp = -symmetrized(q);
  const Eigen::MatrixXd rp = -symmetrized(r);
  Eigen::LDLT<Eigen::MatrixXd> rp_ldlt(rp);
  if (rp_ldlt.info() != Eigen::Success || !rp_ldlt.isPositive() ||
      rp_ldlt.rcond() < 1e-14) {
    fail_numerical("R singular (or not negative definite)");
  }
  if (!hautus_stabilizable(a, b, beta)) {
    fail_numerical("not stabilizable: (A - beta/2 I, B) fails the Hautus test");
  }
  if (!hautus_detectable(a, q, beta)) {
    fail_numerical("not detectable: (A - beta/2 I, Q) fails the Hautus test");
  }
  const Eigen::MatrixXd rinv_bt = rp_ldlt.solve(b.transpose());
  const Eigen::MatrixXd s = symmetrized(b * rinv_bt);

  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(b.cols(), n);
  if (!(spectral_abscissa(abar) < 0.0)) {
    // Stable invariant subspace of the Hamiltonian gives the Riccati solution
    // up to round-off; Newton then polishes it.
    Eigen::MatrixXd ham(2 * n, 2 * n);
    ham << abar, -s, -qp, -abar.transpose();
    Eigen::EigenSolver<Eigen::MatrixXd> es(ham);
    if (es.info() != Eigen::Success) {
      fail_numerical("not stabilizable: Hamiltonian eigensolver failed");
    }
    Eigen::MatrixXcd basis(2 * n, n);
    Eigen::Index found = 0;
    for (Eigen::Index j = 0; j < 2 * n && found < n; ++j) {
      if (es.eigenvalues()(j).real() < 0.0) {
        basis.col(found++) = es.eigenvectors().col(j);
      }
    }
    if (found != n) {
      fail_numerical("not stabilizable: Hamiltonian has eigenvalues on the imaginary axis");
    }
    const Eigen::MatrixXcd u1 = basis.topRows(n);
    const Eigen::MatrixXcd u2 = basis.bottomRows(n);
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(u1);
    const Eigen::MatrixXd x0 = symmetrized((u2 * lu.inverse()).real());
    k = -rinv_bt * x0;
    if (!k.allFinite() || !(spectral_abscissa(abar + b * k) < 0.0)) {
      fail_numerical("not stabilizable: no stabilizing initial gain found");
    }
  }

  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, n);
  double best = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < 100; ++iter) {
    const Eigen::MatrixXd f = abar + b * k;
    x = solve_continuous_lyapunov(f, qp + k.transpose() * rp * k);
    k = -rinv_bt * x;
    const double res =
        (abar.transpose() * x + x * abar - x * s * x + qp).norm();
    const double scale = 1.0 + qp.norm() + 2.0 * abar.norm() * x.norm() +
                         s.norm() * x.squaredNorm();
    if (res < 1e-11 || res < 1e-15 * scale) {
      break;
    }
    // Quadratic convergence stalls at round-off; stop once it stops improving.
    if (res >= best && res < 1e-9 * (1.0 + x.norm())) {
      break;
    }
    best = std::min(best, res);
  }
  const Eigen::MatrixXd p = -x;
  const double res = care_residual(a, b, q, r, beta, p);
  if (!p.allFinite() || !(res < 1e-9 * (1.0 + p.norm())) ||
      !is_negative_definite(p)) {
    fail_numerical("not stabilizable/detectable: Newton-Kleinman did not converge (residual " +
                   std::to_string(res) + ")");
  }
  return p;
}

}  // namespace phibe
