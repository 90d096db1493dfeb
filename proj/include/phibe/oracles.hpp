#pragma once

#include <Eigen/Dense>
#include <functional>

#include "phibe/environments.hpp"
#include "phibe/policy.hpp"
#include "phibe/policy_eval.hpp"

namespace phibe {

/// V(s) = s^T P s + constant.
struct QuadraticValue {
  Eigen::MatrixXd P;
  double constant = 0.0;

  double operator()(const Eigen::VectorXd& s) const { return s.dot(P * s) + constant; }
};

struct LqrSolution {
  LinearPolicy policy;
  QuadraticValue value;
};

/// Optimal gain and value from the continuous Riccati equation.
LqrSolution lqr_optimal(const LqrSystem& sys);

/// Scalar closed form of the optimal gain.
LinearPolicy lqr_optimal_1d(const LqrSystem& sys);

/// Value of a linear policy under the true dynamics; throws "unstable closed
/// loop" when it is infinite.
QuadraticValue lqr_policy_value(const LqrSystem& sys, const LinearPolicy& policy);

/// Drift pair recovered by the order-i estimators for a linear system.
struct EffectiveDynamics {
  Eigen::MatrixXd A_hat;
  Eigen::MatrixXd B_hat;
  int order = 1;
  double dt = 0.0;
};

EffectiveDynamics phibe_effective_dynamics(const LqrSystem& sys, double dt, int order);

/// Optimal gain of the LQR problem with (A_hat_i, B_hat_i).
LinearPolicy phibe_optimal(const LqrSystem& sys, double dt, int order);

/// Fixed point of the discrete-time Bellman equation with exact transitions.
LinearPolicy be_optimal_1d(const LqrSystem& sys, double dt,
                           DiscountChoice choice = DiscountChoice::kExp);
LinearPolicy be_optimal(const LqrSystem& sys, double dt,
                        DiscountChoice choice = DiscountChoice::kExp);

/// Optimal constant allocation.
double merton_optimal(const MertonMarket& market);

/// c with V(W) = c W^{1-gamma} for the constant allocation a.
double merton_policy_value(const MertonMarket& market, double a);

using ScalarField = std::function<double(const Eigen::VectorXd&)>;

/// Composite-trapezoid L2 norm of f - g on a box (grid_points per axis).
double l2_distance_on_box(const ScalarField& f, const ScalarField& g, const Box& box,
                          int grid_points);

/// Default evaluation grid: 601 points in 1D, 201 per axis otherwise.
int default_grid_points(int dim);

}  // namespace phibe
