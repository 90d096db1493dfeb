#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

#include "phibe/basis.hpp"
#include "phibe/environments.hpp"
#include "phibe/increments.hpp"

namespace phibe {

/// Galerkin solves above this condition estimate are flagged in the result.
inline constexpr double kConditionWarning = 1e10;

struct ValueEstimate {
  Eigen::VectorXd theta;
  double condition = 0.0;
  std::size_t sample_count = 0;
  bool ill_conditioned = false;

  double operator()(const BasisSet& phi, const Eigen::VectorXd& s) const {
    return phi.value(s).dot(theta);
  }
};

/// Discount and reward scaling of the discrete-time (BE) formulation.
enum class DiscountChoice {
  kExp,      // gamma = e^{-beta dt}, reward r dt
  kOptimal,  // gamma = 1/(beta dt + 1), reward gamma r dt
};

double be_discount(double beta, double dt, DiscountChoice choice);
double be_reward_scale(double beta, double dt, DiscountChoice choice);

/// Galerkin solve of beta V - b.grad V - 1/2 Sigma:hess V = r on the windows.
ValueEstimate phibe_policy_evaluation(const std::vector<Window>& windows,
                                      const BasisSet& phi, double beta);

/// Order-i evaluation on a batch collected under the policy (all windows).
ValueEstimate phibe_policy_evaluation(const TrajectoryBatch& batch,
                                      const BasisSet& phi, double beta, int order,
                                      DiffusionMode diffusion);

/// LSTD-style solve of V(s^j) = r^j dt + gamma V(s^{j+1}).
ValueEstimate be_policy_evaluation(const TrajectoryBatch& batch, const BasisSet& phi,
                                   double beta,
                                   DiscountChoice choice = DiscountChoice::kExp);

}  // namespace phibe
