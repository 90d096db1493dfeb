#include "phibe/oracles.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "phibe/coefficients.hpp"
#include "phibe/error.hpp"
#include "phibe/matcore.hpp"

namespace phibe {
namespace {

void require_scalar(const LqrSystem& sys, const char* who) {
  if (sys.state_dim() != 1 || sys.action_dim() != 1) {
    fail_argument(std::string(who) + ": needs d = m = 1");
  }
}

Eigen::MatrixXd gain_from_p(const Eigen::MatrixXd& b, const Eigen::MatrixXd& r,
                            const Eigen::MatrixXd& p) {
  return -r.ldlt().solve(b.transpose() * p);
}

double value_constant(const LqrSystem& sys, const Eigen::MatrixXd& p) {
  if (sys.sigma() == 0.0) return 0.0;
  return sys.sigma() * sys.sigma() * p.trace() / sys.beta();
}

// Standard-form DARE residual X - (Q + F'XF - F'XG (R + G'XG)^{-1} G'XF).
double dare_residual(const Eigen::MatrixXd& f, const Eigen::MatrixXd& g,
                     const Eigen::MatrixXd& q, const Eigen::MatrixXd& r,
                     const Eigen::MatrixXd& x) {
  const Eigen::MatrixXd s = r + g.transpose() * x * g;
  const Eigen::MatrixXd gxf = g.transpose() * x * f;
  const Eigen::MatrixXd rhs =
      q + f.transpose() * x * f - gxf.transpose() * s.ldlt().solve(gxf);
  return (x - rhs).norm();
}

Eigen::MatrixXd dare_gain(const Eigen::MatrixXd& f, const Eigen::MatrixXd& g,
                          const Eigen::MatrixXd& r, const Eigen::MatrixXd& x) {
  const Eigen::MatrixXd s = r + g.transpose() * x * g;
  return -s.ldlt().solve(g.transpose() * x * f);
}

}  // namespace

LqrSolution lqr_optimal(const LqrSystem& sys) {
  const Eigen::MatrixXd p = solve_care(sys.A(), sys.B(), sys.Q(), sys.R(), sys.beta());
  LqrSolution out;
  out.policy = LinearPolicy(gain_from_p(sys.B(), sys.R(), p));
  out.value.P = p;
  out.value.constant = value_constant(sys, p);
  return out;
}

LinearPolicy lqr_optimal_1d(const LqrSystem& sys) {
  require_scalar(sys, "lqr_optimal_1d");
  const double a = sys.A()(0, 0);
  const double b = sys.B()(0, 0);
  const double q = sys.Q()(0, 0);
  const double r = sys.R()(0, 0);
  if (b == 0.0) fail_argument("lqr_optimal_1d: B must be nonzero");
  const double h = 0.5 * sys.beta() - a;
  const double k = (h - std::sqrt(h * h + q * b * b / r)) / b;
  return LinearPolicy(Eigen::MatrixXd::Constant(1, 1, k));
}

QuadraticValue lqr_policy_value(const LqrSystem& sys, const LinearPolicy& policy) {
  if (policy.K.rows() != sys.action_dim() || policy.K.cols() != sys.state_dim()) {
    fail_argument("lqr_policy_value: policy shape mismatch");
  }
  if (policy.offset.size() > 0 && policy.offset.cwiseAbs().maxCoeff() != 0.0) {
    fail_argument("lqr_policy_value: affine policies are not supported");
  }
  const Eigen::MatrixXd f = sys.A() + sys.B() * policy.K;
  const Eigen::MatrixXd m = sys.Q() + policy.K.transpose() * sys.R() * policy.K;
  QuadraticValue out;
  out.P = solve_policy_lyapunov(f, symmetrized(m), sys.beta());
  out.constant = value_constant(sys, out.P);
  return out;
}

EffectiveDynamics phibe_effective_dynamics(const LqrSystem& sys, double dt, int order) {
  if (!(dt > 0.0)) fail_argument("phibe_effective_dynamics: dt must be positive");
  const auto& c = bellman_order_coefficients(order).coeffs;
  const Eigen::Index d = sys.state_dim();
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(d, d);
  EffectiveDynamics out;
  out.order = order;
  out.dt = dt;
  out.A_hat = Eigen::MatrixXd::Zero(d, d);
  out.B_hat = Eigen::MatrixXd::Zero(d, sys.action_dim());
  for (int j = 1; j <= order; ++j) {
    const double t = j * dt;
    out.A_hat += c[j - 1] / dt * (mat_exp(sys.A(), t) - id);
    out.B_hat += c[j - 1] * j * phi1(sys.A(), t) * sys.B();
  }
  return out;
}

LinearPolicy phibe_optimal(const LqrSystem& sys, double dt, int order) {
  const EffectiveDynamics eff = phibe_effective_dynamics(sys, dt, order);
  if (!hautus_stabilizable(eff.A_hat, eff.B_hat, sys.beta())) {
    fail_numerical("phibe_optimal: effective pair (A_hat - beta/2, B_hat) is not stabilizable at dt = " +
                   std::to_string(dt));
  }
  if (!hautus_detectable(eff.A_hat, sys.Q(), sys.beta())) {
    fail_numerical("phibe_optimal: effective pair (A_hat - beta/2, Q) is not detectable at dt = " +
                   std::to_string(dt));
  }
  const Eigen::MatrixXd p = solve_care(eff.A_hat, eff.B_hat, sys.Q(), sys.R(), sys.beta());
  return LinearPolicy(gain_from_p(eff.B_hat, sys.R(), p));
}

LinearPolicy be_optimal_1d(const LqrSystem& sys, double dt, DiscountChoice choice) {
  require_scalar(sys, "be_optimal_1d");
  const EffectiveDynamics eff = phibe_effective_dynamics(sys, dt, 1);
  const double ah = eff.A_hat(0, 0);
  const double bh = eff.B_hat(0, 0);
  const double q = sys.Q()(0, 0);
  const double r = sys.R()(0, 0);
  const double gamma = be_discount(sys.beta(), dt, choice);
  const double beta_eff = (1.0 / gamma - 1.0) / dt;
  // Quadratic in P~ after eliminating K~; Q and R enter unscaled because a
  // common reward scale cancels out of the gain.
  const double c2 = -(1.0 + beta_eff * dt) * bh * bh;
  const double c1 = (2.0 * ah - beta_eff) * r + q * bh * bh * dt + ah * ah * r * dt;
  const double c0 = q * r;
  const double disc = c1 * c1 - 4.0 * c2 * c0;
  if (!(disc >= 0.0) || c2 == 0.0) {
    fail_numerical("be_optimal_1d: no real root");
  }
  // Cancellation-free roots.
  const double t = -0.5 * (c1 + std::copysign(std::sqrt(disc), c1));
  const double p = std::min(t / c2, c0 / t);
  if (!(p < 0.0)) fail_numerical("be_optimal_1d: no negative root");
  const double k = -(bh * p + bh * p * ah * dt) / (r + bh * bh * p * dt);
  return LinearPolicy(Eigen::MatrixXd::Constant(1, 1, k));
}

LinearPolicy be_optimal(const LqrSystem& sys, double dt, DiscountChoice choice) {
  const EffectiveDynamics eff = phibe_effective_dynamics(sys, dt, 1);
  const Eigen::Index d = sys.state_dim();
  const double gamma = be_discount(sys.beta(), dt, choice);
  const double c = be_reward_scale(sys.beta(), dt, choice);
  // Absorb the discount into the dynamics and negate to standard form.
  const double sg = std::sqrt(gamma);
  const Eigen::MatrixXd f = sg * (Eigen::MatrixXd::Identity(d, d) + eff.A_hat * dt);
  const Eigen::MatrixXd g = sg * eff.B_hat * dt;
  const Eigen::MatrixXd qp = -c * sys.Q();
  const Eigen::MatrixXd rp = -c * sys.R();

  // The continuous value scaled to the discrete reward is a good start.
  Eigen::MatrixXd x =
      -(c / dt) * solve_care(sys.A(), sys.B(), sys.Q(), sys.R(), sys.beta());
  const double tol_scale = 1.0 + qp.norm();
  int iter = 0;
  bool converged = false;
  // Riccati recursion until the gain stabilizes the scaled closed loop.
  for (; iter < 500; ++iter) {
    const Eigen::MatrixXd k = dare_gain(f, g, rp, x);
    if (spectral_radius(f + g * k) < 1.0 && iter >= 5) break;
    const Eigen::MatrixXd fc = f + g * k;
    x = symmetrized(fc.transpose() * x * fc + qp + k.transpose() * rp * k);
    if (!x.allFinite()) fail_numerical("be_optimal: Riccati recursion diverged");
    if (dare_residual(f, g, qp, rp, x) < 1e-10 * (tol_scale + x.norm())) {
      converged = true;
      break;
    }
  }
  // Newton (Hewer) refinement.
  for (; !converged && iter < 500; ++iter) {
    const Eigen::MatrixXd k = dare_gain(f, g, rp, x);
    const Eigen::MatrixXd fc = f + g * k;
    if (!(spectral_radius(fc) < 1.0)) {
      fail_numerical("be_optimal: lost a stabilizing gain");
    }
    x = solve_discrete_lyapunov(fc, qp + k.transpose() * rp * k);
    if (dare_residual(f, g, qp, rp, x) < 1e-10 * (tol_scale + x.norm())) {
      converged = true;
    }
  }
  if (!converged) {
    fail_numerical("be_optimal: modified Riccati equation did not converge in 500 iterations");
  }
  // A few Newton polishing steps while the residual keeps dropping.
  double res = dare_residual(f, g, qp, rp, x);
  for (int extra = 0; extra < 4; ++extra) {
    const Eigen::MatrixXd k = dare_gain(f, g, rp, x);
    const Eigen::MatrixXd fc = f + g * k;
    if (!(spectral_radius(fc) < 1.0)) break;
    const Eigen::MatrixXd next = solve_discrete_lyapunov(fc, qp + k.transpose() * rp * k);
    const double next_res = dare_residual(f, g, qp, rp, next);
    if (!(next_res < res)) break;
    x = next;
    res = next_res;
  }
  return LinearPolicy(dare_gain(f, g, rp, x));
}

double merton_optimal(const MertonMarket& market) {
  const double var = market.gamma_risk() * market.sigma() * market.sigma();
  double a = (market.mu() - market.r()) / var;
  if (a > 1.0) a = std::max(1.0, (market.mu() - market.r_b()) / var);
  return std::max(a, 0.0);
}

double merton_policy_value(const MertonMarket& market, double a) {
  if (!(a >= 0.0)) fail_argument("merton_policy_value: allocation must be nonnegative");
  const double g = market.gamma_risk();
  const double m = market.drift(a);
  const double v = market.volatility(a);
  const double denom = market.beta() - (1.0 - g) * m + 0.5 * g * (1.0 - g) * v * v;
  if (!(denom > 0.0)) {
    fail_argument("merton_policy_value: discounted utility diverges for this allocation");
  }
  return 1.0 / ((1.0 - g) * denom);
}

int default_grid_points(int dim) { return dim == 1 ? 601 : 201; }

double l2_distance_on_box(const ScalarField& f, const ScalarField& g, const Box& box,
                          int grid_points) {
  box.validate("l2_distance_on_box");
  if (grid_points < 2) fail_argument("l2_distance_on_box: need at least 2 grid points");
  const int d = box.dim();
  std::vector<double> h(d);
  for (int i = 0; i < d; ++i) h[i] = (box.hi(i) - box.lo(i)) / (grid_points - 1);
  std::vector<int> idx(d, 0);
  Eigen::VectorXd x(d);
  double sum = 0.0;
  while (true) {
    double w = 1.0;
    for (int i = 0; i < d; ++i) {
      x(i) = box.lo(i) + idx[i] * h[i];
      const bool edge = idx[i] == 0 || idx[i] == grid_points - 1;
      w *= (edge ? 0.5 : 1.0) * h[i];
    }
    const double diff = f(x) - g(x);
    sum += w * diff * diff;
    int i = 0;
    while (i < d && ++idx[i] == grid_points) {
      idx[i] = 0;
      ++i;
    }
    if (i == d) break;
  }
  return std::sqrt(sum);
}

}  // namespace phibe
