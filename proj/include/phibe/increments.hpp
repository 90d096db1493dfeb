#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "phibe/environments.hpp"
#include "phibe/policy.hpp"

namespace phibe {

enum class DiffusionMode { kZero, kEmpirical };

/// Which start indices of a trajectory form an order-i window.
enum class WindowMode {
  kHeldOnly,  // a^j = ... = a^{j+i-1}; the action is held across the window
  kAll,       // every j = 0..I-i
};

/// One estimation point: the state/action/reward at the window start and the
/// order-i drift and diffusion estimates
///   b = (1/dt) sum_k c_k (s^{j+k} - s^j),
///   Sigma = (1/dt) sum_k c_k (s^{j+k} - s^j)(s^{j+k} - s^j)^T.
/// `diffusion` is empty in DiffusionMode::kZero.
struct Window {
  Eigen::VectorXd state;
  Eigen::VectorXd action;
  double reward = 0.0;
  Eigen::VectorXd drift;
  Eigen::MatrixXd diffusion;
};

using WindowFilter = std::function<bool(const Window&)>;

/// Windows built from the observed increments of a batch.
std::vector<Window> sampled_windows(const TrajectoryBatch& batch, int order,
                                    DiffusionMode diffusion, WindowMode mode);

/// Windows at the batch's data points with increments replaced by their exact
/// expectations, holding the recorded action over the window.
std::vector<Window> exact_held_windows(const TrajectoryBatch& batch,
                                       const Environment& env, int order,
                                       DiffusionMode diffusion);

/// As exact_held_windows, but the policy is re-applied at every step.
std::vector<Window> exact_policy_windows(const TrajectoryBatch& batch,
                                         const Environment& env,
                                         const LinearPolicy& policy, int order,
                                         DiffusionMode diffusion);

}  // namespace phibe
