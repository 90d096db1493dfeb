#include "phibe/increments.hpp"

#include <string>

#include "phibe/coefficients.hpp"
#include "phibe/error.hpp"

namespace phibe {
namespace {

void check_order(const TrajectoryBatch& batch, int order, const char* who) {
  if (order < 1 || order > kMaxOrder) {
    fail_argument(std::string(who) + ": order out of range");
  }
  if (!(batch.dt > 0.0)) fail_argument(std::string(who) + ": batch has no dt");
}

bool held_over(const Trajectory& tr, int j, int order) {
  for (int k = 1; k < order; ++k) {
    if (tr.actions.row(j + k) != tr.actions.row(j)) return false;
  }
  return true;
}

template <typename MomentFn>
std::vector<Window> exact_windows(const TrajectoryBatch& batch, int order,
                                  DiffusionMode diffusion, MomentFn moments) {
  const auto& c = bellman_order_coefficients(order).coeffs;
  const double inv_dt = 1.0 / batch.dt;
  std::vector<Window> out;
  out.reserve(batch.num_transitions());
  for (const auto& tr : batch.trajectories) {
    for (int j = 0; j + order <= tr.steps(); ++j) {
      Window w;
      w.state = tr.states.row(j).transpose();
      w.action = tr.actions.row(j).transpose();
      w.reward = tr.rewards(j);
      w.drift = Eigen::VectorXd::Zero(batch.state_dim);
      if (diffusion == DiffusionMode::kEmpirical) {
        w.diffusion = Eigen::MatrixXd::Zero(batch.state_dim, batch.state_dim);
      }
      for (int k = 1; k <= order; ++k) {
        const IncrementMoments mk = moments(w, k);
        w.drift += c[k - 1] * inv_dt * mk.mean;
        if (diffusion == DiffusionMode::kEmpirical) {
          w.diffusion += c[k - 1] * inv_dt * mk.second;
        }
      }
      out.push_back(std::move(w));
    }
  }
  return out;
}

}  // namespace

std::vector<Window> sampled_windows(const TrajectoryBatch& batch, int order,
                                    DiffusionMode diffusion, WindowMode mode) {
  check_order(batch, order, "sampled_windows");
  const auto& c = bellman_order_coefficients(order).coeffs;
  const double inv_dt = 1.0 / batch.dt;
  std::vector<Window> out;
  out.reserve(batch.num_transitions());
  for (const auto& tr : batch.trajectories) {
    for (int j = 0; j + order <= tr.steps(); ++j) {
      if (mode == WindowMode::kHeldOnly && !held_over(tr, j, order)) continue;
      Window w;
      w.state = tr.states.row(j).transpose();
      w.action = tr.actions.row(j).transpose();
      w.reward = tr.rewards(j);
      w.drift = Eigen::VectorXd::Zero(batch.state_dim);
      if (diffusion == DiffusionMode::kEmpirical) {
        w.diffusion = Eigen::MatrixXd::Zero(batch.state_dim, batch.state_dim);
      }
      for (int k = 1; k <= order; ++k) {
        const Eigen::VectorXd delta = (tr.states.row(j + k) - tr.states.row(j)).transpose();
        w.drift += c[k - 1] * inv_dt * delta;
        if (diffusion == DiffusionMode::kEmpirical) {
          w.diffusion += c[k - 1] * inv_dt * delta * delta.transpose();
        }
      }
      out.push_back(std::move(w));
    }
  }
  return out;
}

std::vector<Window> exact_held_windows(const TrajectoryBatch& batch,
                                       const Environment& env, int order,
                                       DiffusionMode diffusion) {
  check_order(batch, order, "exact_held_windows");
  return exact_windows(batch, order, diffusion, [&](const Window& w, int k) {
    return env.held_moments(w.state, w.action, batch.dt, k);
  });
}

std::vector<Window> exact_policy_windows(const TrajectoryBatch& batch,
                                         const Environment& env,
                                         const LinearPolicy& policy, int order,
                                         DiffusionMode diffusion) {
  check_order(batch, order, "exact_policy_windows");
  return exact_windows(batch, order, diffusion, [&](const Window& w, int k) {
    return env.policy_moments(w.state, policy, batch.dt, k);
  });
}

}  // namespace phibe
