#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

#include "phibe/basis.hpp"
#include "phibe/environments.hpp"
#include "phibe/increments.hpp"
#include "phibe/policy.hpp"
#include "phibe/policy_eval.hpp"

namespace phibe {

enum class QMethod { kGalerkin, kGradientDescent, kBe };

struct QEstimate {
  Eigen::VectorXd omega;
  QMethod method = QMethod::kGalerkin;
  double condition = 0.0;   // Galerkin / BE solves
  double final_loss = 0.0;  // least-squares loss at omega (PhiBE methods)
  double grad_norm = 0.0;   // gradient descent only
  int iterations = 0;       // gradient descent only
  std::size_t sample_count = 0;
};

/// Normal equations G w = h of the PhiBE q regression, with
/// G = sum Psi Psi^T, h = sum target Psi and c = sum target^2.
struct QSystem {
  Eigen::MatrixXd gram;
  Eigen::VectorXd rhs;
  double target_sq = 0.0;
  std::size_t count = 0;
};

/// Drift convention for the q targets.
enum class DriftScaling {
  kNormalized,  // b = (1/dt) sum_k c_k (s^{j+k} - s^j)
  kPrinted,     // the same sum without the 1/dt factor
};

struct QOptions {
  int order = 1;
  DiffusionMode diffusion = DiffusionMode::kZero;
  WindowMode windows = WindowMode::kHeldOnly;
  DriftScaling drift = DriftScaling::kNormalized;
  WindowFilter filter;  // optional; windows failing it are dropped
};

/// Targets r + b.grad V + 1/2 Sigma:hess V regressed on Psi(s, a).
QSystem assemble_q_system(const std::vector<Window>& windows, const BasisSet& psi,
                          const BasisSet& phi, const ValueEstimate& value,
                          double dt, DriftScaling drift = DriftScaling::kNormalized,
                          const WindowFilter& filter = {});

QEstimate phibe_q_galerkin(const std::vector<Window>& windows, const BasisSet& psi,
                           const BasisSet& phi, const ValueEstimate& value, double dt,
                           DriftScaling drift = DriftScaling::kNormalized,
                           const WindowFilter& filter = {});

QEstimate phibe_q_galerkin(const TrajectoryBatch& batch, const BasisSet& psi,
                           const BasisSet& phi, const ValueEstimate& value,
                           const QOptions& options = {});

struct GdStopping {
  int max_iters = 10000;
  double grad_tol = 1e-9;
};

/// Full-batch gradient descent w <- w - alpha F(w), F(w) = (G w - h) / N.
QEstimate phibe_q_gradient_descent(const QSystem& system, const Eigen::VectorXd& omega0,
                                   double alpha, const GdStopping& stopping = {});

QEstimate phibe_q_gradient_descent(const TrajectoryBatch& batch, const BasisSet& psi,
                                   const BasisSet& phi, const ValueEstimate& value,
                                   const Eigen::VectorXd& omega0, double alpha,
                                   const QOptions& options = {},
                                   const GdStopping& stopping = {});

/// Largest eigenvalue of G / N; steps below 2 / lambda_max are stable.
double q_gram_lambda_max(const QSystem& system);

/// Next-step feature used by the BE Q evaluation.
enum class BeNextAction {
  kOnPolicy,       // Psi(s^{j+1}, pi(s^{j+1}))
  kCurrentAction,  // Psi(s^{j+1}, a^j)
};

/// Solves sum Psi (Psi - gamma Psi')^T w = sum r dt Psi. `policy` is required
/// for BeNextAction::kOnPolicy.
QEstimate be_q_evaluation(const TrajectoryBatch& batch, const BasisSet& psi, double beta,
                          DiscountChoice choice = DiscountChoice::kExp,
                          BeNextAction next = BeNextAction::kOnPolicy,
                          const LinearPolicy* policy = nullptr);

}  // namespace phibe
