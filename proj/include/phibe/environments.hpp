#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "phibe/policy.hpp"

namespace phibe {

/// dx = (A x + B a) dt + sigma dW, reward x^T Q x + a^T R a, discount beta.
class LqrSystem {
 public:
  /// Validates shapes, symmetry, definiteness, sigma/beta and the Hautus
  /// conditions; throws Error(kInvalidArgument) otherwise.
  LqrSystem(Eigen::MatrixXd a, Eigen::MatrixXd b, Eigen::MatrixXd q,
            Eigen::MatrixXd r, double sigma, double beta);

  static LqrSystem scalar(double a, double b, double q, double r, double sigma,
                          double beta);

  const Eigen::MatrixXd& A() const { return a_; }
  const Eigen::MatrixXd& B() const { return b_; }
  const Eigen::MatrixXd& Q() const { return q_; }
  const Eigen::MatrixXd& R() const { return r_; }
  double sigma() const { return sigma_; }
  double beta() const { return beta_; }
  int state_dim() const { return static_cast<int>(a_.rows()); }
  int action_dim() const { return static_cast<int>(b_.cols()); }

  double reward(const Eigen::VectorXd& s, const Eigen::VectorXd& a) const {
    return s.dot(q_ * s) + a.dot(r_ * a);
  }

 private:
  Eigen::MatrixXd a_, b_, q_, r_;
  double sigma_;
  double beta_;
};

/// Two-asset market with a borrowing premium above full allocation.
class MertonMarket {
 public:
  MertonMarket(double r, double r_b, double mu, double sigma,
               double gamma_risk, double beta);

  double r() const { return r_; }
  double r_b() const { return r_b_; }
  double mu() const { return mu_; }
  double sigma() const { return sigma_; }
  double gamma_risk() const { return gamma_; }
  double beta() const { return beta_; }

  /// Wealth drift rate for allocation a (cash or borrowing branch).
  double drift(double a) const;
  double volatility(double a) const { return sigma_ * a; }
  double reward(double wealth) const;

 private:
  double r_, r_b_, mu_, sigma_, gamma_, beta_;
};

/// One-step law of an LQR state under a held action:
/// s' ~ N(mean_state s + mean_action a, covariance).
struct TransitionKernel {
  Eigen::MatrixXd mean_state;
  Eigen::MatrixXd mean_action;
  Eigen::MatrixXd covariance;
  double dt = 0.0;

  Eigen::VectorXd mean(const Eigen::VectorXd& s, const Eigen::VectorXd& a) const {
    return mean_state * s + mean_action * a;
  }
};

TransitionKernel lqr_exact_transition(const LqrSystem& sys, double dt);

/// Axis-aligned box, one interval per coordinate.
struct Box {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  static Box uniform(int dim, double lo, double hi) {
    return Box{Eigen::VectorXd::Constant(dim, lo), Eigen::VectorXd::Constant(dim, hi)};
  }
  int dim() const { return static_cast<int>(lo.size()); }
  void validate(const char* what) const;
};

/// Rows are time steps: states (I+1) x d, actions I x m, rewards I.
struct Trajectory {
  Eigen::MatrixXd states;
  Eigen::MatrixXd actions;
  Eigen::VectorXd rewards;

  int steps() const { return static_cast<int>(actions.rows()); }
};

struct TrajectoryBatch {
  double dt = 0.0;
  int state_dim = 0;
  int action_dim = 0;
  std::uint64_t seed = 0;
  int hold_steps = 1;
  std::vector<Trajectory> trajectories;
  std::vector<std::string> warnings;

  std::size_t num_transitions() const;
};

/// Trajectory count, length and sampling boxes shared by all samplers.
struct SamplingPlan {
  int num_traj = 0;
  int steps = 0;
  Box init_box;
  Box action_box;
};

/// Random actions, uniform on the action box, each held for hold_steps steps.
TrajectoryBatch sample_lqr_batch(const LqrSystem& sys, double dt,
                                 const SamplingPlan& plan, int hold_steps,
                                 std::uint64_t seed);

/// Closed-loop rollout a^j = pi(s^j), re-applied every hold_steps steps.
/// Throws Error(kNumerical) on blow-up.
TrajectoryBatch sample_policy_lqr_batch(const LqrSystem& sys, double dt,
                                        const LinearPolicy& policy,
                                        const SamplingPlan& plan,
                                        std::uint64_t seed, int hold_steps = 1);

/// Random first action, then the policy.
TrajectoryBatch sample_first_random_lqr_batch(const LqrSystem& sys, double dt,
                                              const LinearPolicy& policy,
                                              const SamplingPlan& plan,
                                              std::uint64_t seed);

/// Exact geometric Brownian step of wealth under allocation a.
double merton_step(const MertonMarket& market, double wealth, double a,
                   double dt, double noise);

TrajectoryBatch sample_merton_batch(const MertonMarket& market, double dt,
                                    const SamplingPlan& plan, int hold_steps,
                                    std::uint64_t seed);

TrajectoryBatch sample_policy_merton_batch(const MertonMarket& market,
                                           double dt,
                                           const LinearPolicy& policy,
                                           const SamplingPlan& plan,
                                           std::uint64_t seed, int hold_steps = 1);

TrajectoryBatch sample_first_random_merton_batch(const MertonMarket& market,
                                                 double dt,
                                                 const LinearPolicy& policy,
                                                 const SamplingPlan& plan,
                                                 std::uint64_t seed);

/// First two moments of the k-step increment s^k - s^0.
struct IncrementMoments {
  Eigen::VectorXd mean;    // E[s^k - s^0]
  Eigen::MatrixXd second;  // E[(s^k - s^0)(s^k - s^0)^T]
};

/// Uniform front end for the policy-iteration drivers.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual int state_dim() const = 0;
  virtual int action_dim() const = 0;
  virtual double beta() const = 0;
  virtual double reward(const Eigen::VectorXd& s, const Eigen::VectorXd& a) const = 0;

  virtual TrajectoryBatch sample_random(double dt, const SamplingPlan& plan,
                                        int hold_steps, std::uint64_t seed) const = 0;
  /// The policy is re-evaluated every hold_steps steps and held in between.
  virtual TrajectoryBatch sample_policy(double dt, const LinearPolicy& policy,
                                        const SamplingPlan& plan, int hold_steps,
                                        std::uint64_t seed) const = 0;
  virtual TrajectoryBatch sample_first_random(double dt, const LinearPolicy& policy,
                                              const SamplingPlan& plan,
                                              std::uint64_t seed) const = 0;

  /// Exact moments with the action a held over all k steps.
  virtual IncrementMoments held_moments(const Eigen::VectorXd& s,
                                        const Eigen::VectorXd& a, double dt,
                                        int k) const = 0;
  /// Exact moments when the policy is re-applied at every step.
  virtual IncrementMoments policy_moments(const Eigen::VectorXd& s,
                                          const LinearPolicy& policy, double dt,
                                          int k) const = 0;
};

class LqrEnvironment final : public Environment {
 public:
  explicit LqrEnvironment(LqrSystem sys) : sys_(std::move(sys)) {}

  const LqrSystem& system() const { return sys_; }

  int state_dim() const override { return sys_.state_dim(); }
  int action_dim() const override { return sys_.action_dim(); }
  double beta() const override { return sys_.beta(); }
  double reward(const Eigen::VectorXd& s, const Eigen::VectorXd& a) const override {
    return sys_.reward(s, a);
  }
  TrajectoryBatch sample_random(double dt, const SamplingPlan& plan, int hold_steps,
                                std::uint64_t seed) const override;
  TrajectoryBatch sample_policy(double dt, const LinearPolicy& policy,
                                const SamplingPlan& plan, int hold_steps,
                                std::uint64_t seed) const override;
  TrajectoryBatch sample_first_random(double dt, const LinearPolicy& policy,
                                      const SamplingPlan& plan,
                                      std::uint64_t seed) const override;
  IncrementMoments held_moments(const Eigen::VectorXd& s, const Eigen::VectorXd& a,
                                double dt, int k) const override;
  IncrementMoments policy_moments(const Eigen::VectorXd& s, const LinearPolicy& policy,
                                  double dt, int k) const override;

 private:
  LqrSystem sys_;
};

class MertonEnvironment final : public Environment {
 public:
  explicit MertonEnvironment(MertonMarket market) : market_(market) {}

  const MertonMarket& market() const { return market_; }

  int state_dim() const override { return 1; }
  int action_dim() const override { return 1; }
  double beta() const override { return market_.beta(); }
  double reward(const Eigen::VectorXd& s, const Eigen::VectorXd&) const override {
    return market_.reward(s(0));
  }
  TrajectoryBatch sample_random(double dt, const SamplingPlan& plan, int hold_steps,
                                std::uint64_t seed) const override;
  TrajectoryBatch sample_policy(double dt, const LinearPolicy& policy,
                                const SamplingPlan& plan, int hold_steps,
                                std::uint64_t seed) const override;
  TrajectoryBatch sample_first_random(double dt, const LinearPolicy& policy,
                                      const SamplingPlan& plan,
                                      std::uint64_t seed) const override;
  IncrementMoments held_moments(const Eigen::VectorXd& s, const Eigen::VectorXd& a,
                                double dt, int k) const override;
  IncrementMoments policy_moments(const Eigen::VectorXd& s, const LinearPolicy& policy,
                                  double dt, int k) const override;

 private:
  MertonMarket market_;
};

}  // namespace phibe
