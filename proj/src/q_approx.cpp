#include "phibe/q_approx.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "internal/linsolve.hpp"
#include "phibe/error.hpp"

namespace phibe {
namespace {

double loss_at(const QSystem& sys, const Eigen::VectorXd& w) {
  const double n = static_cast<double>(sys.count);
  return 0.5 * (w.dot(sys.gram * w) - 2.0 * sys.rhs.dot(w) + sys.target_sq) / n;
}

}  // namespace

QSystem assemble_q_system(const std::vector<Window>& windows, const BasisSet& psi,
                          const BasisSet& phi, const ValueEstimate& value,
                          double dt, DriftScaling drift, const WindowFilter& filter) {
  if (psi.action_dim() < 1) fail_argument("phibe q: Psi must be a state-action basis");
  if (phi.action_dim() != 0 || phi.state_dim() != psi.state_dim()) {
    fail_argument("phibe q: value basis does not match Psi");
  }
  if (value.theta.size() != phi.size()) {
    fail_argument("phibe q: value coefficients do not match the value basis");
  }
  const int n = psi.size();
  QSystem sys;
  sys.gram = Eigen::MatrixXd::Zero(n, n);
  sys.rhs = Eigen::VectorXd::Zero(n);
  const double drift_scale = drift == DriftScaling::kNormalized ? 1.0 : dt;
  for (const auto& w : windows) {
    if (filter && !filter(w)) continue;
    if (w.action.size() != psi.action_dim()) {
      fail_argument("phibe q: batch action dimension does not match Psi");
    }
    const Eigen::VectorXd f = psi.value(w.state, w.action);
    const double target =
        w.reward +
        phi.generator(w.state, drift_scale * w.drift, w.diffusion).dot(value.theta);
    sys.gram.noalias() += f * f.transpose();
    sys.rhs.noalias() += target * f;
    sys.target_sq += target * target;
    ++sys.count;
  }
  if (sys.count == 0) fail_numerical("singular Gram matrix: no usable windows");
  return sys;
}

QEstimate phibe_q_galerkin(const std::vector<Window>& windows, const BasisSet& psi,
                           const BasisSet& phi, const ValueEstimate& value, double dt,
                           DriftScaling drift, const WindowFilter& filter) {
  const QSystem sys = assemble_q_system(windows, psi, phi, value, dt, drift, filter);
  const auto sol = detail::pivoted_solve(sys.gram, sys.rhs, "singular Gram matrix");
  QEstimate out;
  out.omega = sol.x;
  out.method = QMethod::kGalerkin;
  out.condition = sol.condition;
  out.final_loss = loss_at(sys, out.omega);
  out.sample_count = sys.count;
  return out;
}

QEstimate phibe_q_galerkin(const TrajectoryBatch& batch, const BasisSet& psi,
                           const BasisSet& phi, const ValueEstimate& value,
                           const QOptions& options) {
  return phibe_q_galerkin(
      sampled_windows(batch, options.order, options.diffusion, options.windows), psi,
      phi, value, batch.dt, options.drift, options.filter);
}

double q_gram_lambda_max(const QSystem& system) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
      system.gram / static_cast<double>(system.count), Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

QEstimate phibe_q_gradient_descent(const QSystem& system, const Eigen::VectorXd& omega0,
                                   double alpha, const GdStopping& stopping) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    fail_argument("phibe_q_gradient_descent: alpha must be positive");
  }
  if (omega0.size() != system.rhs.size()) {
    fail_argument("phibe_q_gradient_descent: omega0 has the wrong size");
  }
  const double inv_n = 1.0 / static_cast<double>(system.count);
  QEstimate out;
  out.method = QMethod::kGradientDescent;
  out.sample_count = system.count;
  Eigen::VectorXd w = omega0;
  Eigen::VectorXd grad = (system.gram * w - system.rhs) * inv_n;
  int it = 0;
  while (it < stopping.max_iters && !(grad.norm() < stopping.grad_tol)) {
    w -= alpha * grad;
    if (!w.allFinite() || w.norm() > 1e8) {
      fail_numerical("step size too large: gradient descent diverged at iteration " +
                     std::to_string(it + 1));
    }
    grad = (system.gram * w - system.rhs) * inv_n;
    ++it;
  }
  out.omega = w;
  out.iterations = it;
  out.grad_norm = grad.norm();
  out.final_loss = loss_at(system, w);
  return out;
}

QEstimate phibe_q_gradient_descent(const TrajectoryBatch& batch, const BasisSet& psi,
                                   const BasisSet& phi, const ValueEstimate& value,
                                   const Eigen::VectorXd& omega0, double alpha,
                                   const QOptions& options, const GdStopping& stopping) {
  const QSystem sys = assemble_q_system(
      sampled_windows(batch, options.order, options.diffusion, options.windows), psi,
      phi, value, batch.dt, options.drift, options.filter);
  return phibe_q_gradient_descent(sys, omega0, alpha, stopping);
}

QEstimate be_q_evaluation(const TrajectoryBatch& batch, const BasisSet& psi, double beta,
                          DiscountChoice choice, BeNextAction next,
                          const LinearPolicy* policy) {
  if (psi.action_dim() < 1) fail_argument("be_q_evaluation: Psi must be a state-action basis");
  if (next == BeNextAction::kOnPolicy && policy == nullptr) {
    fail_argument("be_q_evaluation: on-policy next action needs the policy");
  }
  const double dt = batch.dt;
  const double gamma = be_discount(beta, dt, choice);
  const double scale = be_reward_scale(beta, dt, choice);
  const int n = psi.size();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  std::size_t count = 0;
  for (const auto& tr : batch.trajectories) {
    for (int j = 0; j < tr.steps(); ++j) {
      const Eigen::VectorXd s = tr.states.row(j).transpose();
      const Eigen::VectorXd act = tr.actions.row(j).transpose();
      const Eigen::VectorXd s1 = tr.states.row(j + 1).transpose();
      const Eigen::VectorXd a1 = next == BeNextAction::kOnPolicy ? (*policy)(s1) : act;
      const Eigen::VectorXd f = psi.value(s, act);
      a.noalias() += f * (f - gamma * psi.value(s1, a1)).transpose();
      b.noalias() += tr.rewards(j) * scale * f;
      ++count;
    }
  }
  if (count == 0) fail_numerical("be_q_evaluation: batch too short");
  const auto sol = detail::pivoted_solve(a, b, "singular BE Q system");
  QEstimate out;
  out.omega = sol.x;
  out.method = QMethod::kBe;
  out.condition = sol.condition;
  out.sample_count = count;
  return out;
}

}  // namespace phibe
