#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "phibe/basis.hpp"
#include "phibe/environments.hpp"
#include "phibe/increments.hpp"
#include "phibe/policy.hpp"
#include "phibe/policy_eval.hpp"
#include "phibe/q_approx.hpp"

namespace phibe {

/// Admissible actions for the constant-allocation (Merton) improvement step.
struct ActionConstraint {
  double a_min = 0.0;
  double a_max = 5.0;
  /// Refit q on the drift branch (a <= 1 or a > 1) that holds the vertex.
  bool branch_refit = true;
  double kink = 1.0;
};

/// Closed-form greedy policy of a q estimate. Quadratic state-action bases give
/// K = -(2 W_aa)^{-1} W_sa^T; the power basis gives the clipped vertex
/// -w_2 / (2 w_3). Throws "non-concave q in action" otherwise.
LinearPolicy improve_policy(const QEstimate& q, const BasisSet& psi,
                            const ActionConstraint& constraint = {});

enum class QSolver { kGalerkin, kGradientDescent };
enum class MomentSource { kSampled, kExact };

/// How B^pi rollouts apply the policy in sampled mode.
enum class PolicyRollout {
  kEveryStep,   // a^j = pi(s^j) at every step; all windows are used
  kHeldWindow,  // pi(s^j) held for `order` steps; only held windows are used
};

struct BatchPlan {
  SamplingPlan q_plan;       // B^q: generated once, random held actions
  SamplingPlan policy_plan;  // B^pi: regenerated every iteration
};

struct PiOptions {
  int order = 1;
  int iterations = 15;
  QSolver q_solver = QSolver::kGalerkin;
  double gd_alpha = 0.0;  // <= 0 picks 1 / lambda_max of the Gram matrix
  GdStopping gd_stopping;
  DiffusionMode diffusion = DiffusionMode::kZero;
  WindowMode q_windows = WindowMode::kHeldOnly;
  DriftScaling drift = DriftScaling::kNormalized;
  MomentSource moments = MomentSource::kSampled;
  /// Exact moments only: hold pi(s^j) across each evaluation window (true) or
  /// re-apply the policy at every step as a closed-loop rollout does (false).
  bool exact_hold_policy = true;
  PolicyRollout rollout = PolicyRollout::kHeldWindow;
  DiscountChoice discount = DiscountChoice::kExp;
  BeNextAction be_next = BeNextAction::kOnPolicy;
  ActionConstraint constraint;
  double early_stop_tol = 0.0;  // > 0 stops once the policy change is below it
  std::uint64_t seed = 0;
};

struct Metric {
  std::string name;
  double value;
};

/// Optional ground truth attached to a run: maps the current policy and the
/// latest value estimate to named error metrics.
using IterateOracle =
    std::function<std::vector<Metric>(const LinearPolicy&, const ValueEstimate&)>;

struct IterationRecord {
  int iteration = 0;
  LinearPolicy policy;   // policy produced by this iteration
  Eigen::VectorXd theta; // value estimate of the policy evaluated in it
  Eigen::VectorXd omega;
  std::vector<Metric> metrics;
  double wall_ms = 0.0;
  std::uint64_t seed = 0;  // seed of the batch sampled in this iteration
};

struct IterationTrace {
  std::vector<IterationRecord> records;
};

struct PiResult {
  LinearPolicy policy;
  ValueEstimate value;  // evaluation of the returned policy
  IterationTrace trace;
  bool completed = true;
  std::string failure;  // set when a numerical failure ended the run early
};

PiResult optimal_phibe_pi(const Environment& env, double dt, const BasisSet& phi,
                          const BasisSet& psi, const LinearPolicy& pi0,
                          const BatchPlan& plan, const PiOptions& options,
                          const IterateOracle& oracle = {});

PiResult optimal_be_pi(const Environment& env, double dt, const BasisSet& phi,
                       const BasisSet& psi, const LinearPolicy& pi0,
                       const BatchPlan& plan, const PiOptions& options,
                       const IterateOracle& oracle = {});

/// Per-iteration arrays; `include_wall_time` false gives byte-stable output.
std::string trace_to_json(const IterationTrace& trace, bool include_wall_time = true);

/// Long format: iteration,metric,value.
void write_trace_csv(const IterationTrace& trace, std::ostream& out);

}  // namespace phibe
