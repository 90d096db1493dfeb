#include "phibe/policy_eval.hpp"

#include <cmath>

#include "internal/linsolve.hpp"
#include "phibe/error.hpp"

namespace phibe {

double be_discount(double beta, double dt, DiscountChoice choice) {
  return choice == DiscountChoice::kExp ? std::exp(-beta * dt) : 1.0 / (beta * dt + 1.0);
}

double be_reward_scale(double beta, double dt, DiscountChoice choice) {
  return choice == DiscountChoice::kExp ? dt : dt / (beta * dt + 1.0);
}

ValueEstimate phibe_policy_evaluation(const std::vector<Window>& windows,
                                      const BasisSet& phi, double beta) {
  if (phi.action_dim() != 0) {
    fail_argument("phibe_policy_evaluation: expected a value basis");
  }
  if (windows.empty()) fail_numerical("phibe_policy_evaluation: batch too short");
  const int n = phi.size();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  for (const auto& w : windows) {
    const Eigen::VectorXd f = phi.value(w.state);
    const Eigen::VectorXd row = beta * f - phi.generator(w.state, w.drift, w.diffusion);
    a.noalias() += f * row.transpose();
    b.noalias() += w.reward * f;
  }
  const auto sol = detail::pivoted_solve(a, b, "singular Galerkin matrix");
  ValueEstimate out;
  out.theta = sol.x;
  out.condition = sol.condition;
  out.sample_count = windows.size();
  out.ill_conditioned = sol.condition > kConditionWarning;
  return out;
}

ValueEstimate phibe_policy_evaluation(const TrajectoryBatch& batch,
                                      const BasisSet& phi, double beta, int order,
                                      DiffusionMode diffusion) {
  return phibe_policy_evaluation(
      sampled_windows(batch, order, diffusion, WindowMode::kAll), phi, beta);
}

ValueEstimate be_policy_evaluation(const TrajectoryBatch& batch, const BasisSet& phi,
                                   double beta, DiscountChoice choice) {
  if (phi.action_dim() != 0) {
    fail_argument("be_policy_evaluation: expected a value basis");
  }
  const double dt = batch.dt;
  const double gamma = be_discount(beta, dt, choice);
  const double scale = be_reward_scale(beta, dt, choice);
  const int n = phi.size();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  std::size_t count = 0;
  for (const auto& tr : batch.trajectories) {
    if (tr.steps() < 1) continue;
    Eigen::VectorXd next = phi.value(tr.states.row(0).transpose());
    for (int j = 0; j < tr.steps(); ++j) {
      const Eigen::VectorXd f = next;
      next = phi.value(tr.states.row(j + 1).transpose());
      a.noalias() += f * (f - gamma * next).transpose();
      b.noalias() += tr.rewards(j) * scale * f;
      ++count;
    }
  }
  if (count == 0) fail_numerical("be_policy_evaluation: batch too short");
  const auto sol = detail::pivoted_solve(a, b, "singular Galerkin matrix");
  ValueEstimate out;
  out.theta = sol.x;
  out.condition = sol.condition;
  out.sample_count = count;
  out.ill_conditioned = sol.condition > kConditionWarning;
  return out;
}

}  // namespace phibe
