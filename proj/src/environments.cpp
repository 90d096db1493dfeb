#include "phibe/environments.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <random>
#include <string>

#include "phibe/error.hpp"
#include "phibe/matcore.hpp"
#include "phibe/rng.hpp"

namespace phibe {
namespace {

constexpr double kBlowUp = 1e8;
constexpr double kWealthFloor = 1e-12;

void check_dt(double dt, const char* who) {
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    fail_argument(std::string(who) + ": dt must be positive and finite");
  }
}

void check_plan(const SamplingPlan& plan, int d, int m, const char* who) {
  if (plan.num_traj < 1 || plan.steps < 1) {
    fail_argument(std::string(who) + ": need at least one trajectory and one step");
  }
  if (plan.init_box.dim() != d || plan.action_box.dim() != m) {
    fail_argument(std::string(who) + ": sampling boxes do not match the dimensions");
  }
  plan.init_box.validate(who);
  plan.action_box.validate(who);
}

Eigen::VectorXd uniform_in(const Box& box, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXd x(box.dim());
  for (int i = 0; i < box.dim(); ++i) {
    x(i) = box.lo(i) + (box.hi(i) - box.lo(i)) * u(rng);
  }
  return x;
}

// Symmetric square-root factor L with L L^T = C; tolerates singular C.
Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& c) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrized(c));
  const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal();
}

enum class ActionRule { kRandomHeld, kPolicy, kFirstRandom };

TrajectoryBatch rollout_lqr(const LqrSystem& sys, double dt, const SamplingPlan& plan,
                            ActionRule rule, int hold_steps,
                            const LinearPolicy* policy, std::uint64_t seed,
                            const char* who) {
  check_dt(dt, who);
  const int d = sys.state_dim();
  const int m = sys.action_dim();
  check_plan(plan, d, m, who);
  if (hold_steps < 1) {
    fail_argument(std::string(who) + ": hold_steps must be >= 1");
  }
  if (policy != nullptr && (policy->K.rows() != m || policy->K.cols() != d ||
                            policy->offset.size() != m)) {
    fail_argument(std::string(who) + ": policy shape mismatch");
  }
  const TransitionKernel kernel = lqr_exact_transition(sys, dt);
  const bool noisy = sys.sigma() > 0.0;
  const Eigen::MatrixXd factor = noisy ? psd_factor(kernel.covariance)
                                       : Eigen::MatrixXd::Zero(d, d);

  TrajectoryBatch batch;
  batch.dt = dt;
  batch.state_dim = d;
  batch.action_dim = m;
  batch.seed = seed;
  batch.hold_steps = rule == ActionRule::kFirstRandom ? 1 : hold_steps;
  batch.trajectories.resize(static_cast<std::size_t>(plan.num_traj));

  for (int l = 0; l < plan.num_traj; ++l) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(l)));
    std::normal_distribution<double> normal(0.0, 1.0);
    Trajectory& tr = batch.trajectories[static_cast<std::size_t>(l)];
    tr.states.resize(plan.steps + 1, d);
    tr.actions.resize(plan.steps, m);
    tr.rewards.resize(plan.steps);
    Eigen::VectorXd s = uniform_in(plan.init_box, rng);
    Eigen::VectorXd a(m);
    Eigen::VectorXd z(d);
    for (int j = 0; j < plan.steps; ++j) {
      switch (rule) {
        case ActionRule::kRandomHeld:
          if (j % hold_steps == 0) a = uniform_in(plan.action_box, rng);
          break;
        case ActionRule::kPolicy:
          if (j % hold_steps == 0) a = (*policy)(s);
          break;
        case ActionRule::kFirstRandom:
          a = j == 0 ? uniform_in(plan.action_box, rng) : (*policy)(s);
          break;
      }
      tr.states.row(j) = s.transpose();
      tr.actions.row(j) = a.transpose();
      tr.rewards(j) = sys.reward(s, a);
      s = kernel.mean(s, a);
      if (noisy) {
        for (int i = 0; i < d; ++i) z(i) = normal(rng);
        s += factor * z;
      }
      if (!s.allFinite() || s.cwiseAbs().maxCoeff() > kBlowUp) {
        fail_numerical("closed-loop blow-up in trajectory " + std::to_string(l) +
                       " at step " + std::to_string(j + 1));
      }
    }
    tr.states.row(plan.steps) = s.transpose();
  }
  return batch;
}

TrajectoryBatch rollout_merton(const MertonMarket& market, double dt,
                               const SamplingPlan& plan, ActionRule rule,
                               int hold_steps, const LinearPolicy* policy,
                               std::uint64_t seed, const char* who) {
  check_dt(dt, who);
  check_plan(plan, 1, 1, who);
  if (hold_steps < 1) {
    fail_argument(std::string(who) + ": hold_steps must be >= 1");
  }
  if (plan.init_box.lo(0) <= 0.0) {
    fail_argument(std::string(who) + ": initial wealth box must be positive");
  }
  if (plan.action_box.lo(0) < 0.0) {
    fail_argument(std::string(who) + ": allocations must be nonnegative");
  }
  if (policy != nullptr &&
      (policy->K.rows() != 1 || policy->K.cols() != 1 || policy->offset.size() != 1)) {
    fail_argument(std::string(who) + ": policy shape mismatch");
  }

  TrajectoryBatch batch;
  batch.dt = dt;
  batch.state_dim = 1;
  batch.action_dim = 1;
  batch.seed = seed;
  batch.hold_steps = rule == ActionRule::kFirstRandom ? 1 : hold_steps;
  batch.trajectories.resize(static_cast<std::size_t>(plan.num_traj));

  for (int l = 0; l < plan.num_traj; ++l) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(l)));
    std::normal_distribution<double> normal(0.0, 1.0);
    Trajectory& tr = batch.trajectories[static_cast<std::size_t>(l)];
    tr.states.resize(plan.steps + 1, 1);
    tr.actions.resize(plan.steps, 1);
    tr.rewards.resize(plan.steps);
    double w = uniform_in(plan.init_box, rng)(0);
    double a = 0.0;
    int taken = 0;
    bool truncated = false;
    for (int j = 0; j < plan.steps; ++j) {
      switch (rule) {
        case ActionRule::kRandomHeld:
          if (j % hold_steps == 0) a = uniform_in(plan.action_box, rng)(0);
          break;
        case ActionRule::kPolicy:
          if (j % hold_steps == 0) a = (*policy)(Eigen::VectorXd::Constant(1, w))(0);
          break;
        case ActionRule::kFirstRandom:
          a = j == 0 ? uniform_in(plan.action_box, rng)(0)
                     : (*policy)(Eigen::VectorXd::Constant(1, w))(0);
          break;
      }
      a = std::max(a, 0.0);
      tr.states(j, 0) = w;
      tr.actions(j, 0) = a;
      tr.rewards(j) = market.reward(w);
      w = merton_step(market, w, a, dt, normal(rng));
      ++taken;
      if (!(w >= kWealthFloor) || !std::isfinite(w)) {
        batch.warnings.push_back("trajectory " + std::to_string(l) +
                                 " truncated at step " + std::to_string(j + 1) +
                                 ": wealth underflow");
        truncated = true;
        break;
      }
    }
    tr.states(taken, 0) = w;
    if (truncated) {
      // Drop the underflowed terminal state and everything after it.
      tr.states.conservativeResize(taken, 1);
      tr.actions.conservativeResize(taken - 1, 1);
      tr.rewards.conservativeResize(taken - 1);
    }
  }
  return batch;
}

}  // namespace

void Box::validate(const char* what) const {
  if (lo.size() != hi.size()) {
    fail_argument(std::string(what) + ": box bounds differ in length");
  }
  for (Eigen::Index i = 0; i < lo.size(); ++i) {
    if (!std::isfinite(lo(i)) || !std::isfinite(hi(i)) || !(lo(i) <= hi(i))) {
      fail_argument(std::string(what) + ": empty or non-finite box");
    }
  }
}

std::size_t TrajectoryBatch::num_transitions() const {
  std::size_t n = 0;
  for (const auto& tr : trajectories) n += static_cast<std::size_t>(tr.steps());
  return n;
}

LqrSystem::LqrSystem(Eigen::MatrixXd a, Eigen::MatrixXd b, Eigen::MatrixXd q,
                     Eigen::MatrixXd r, double sigma, double beta)
    : a_(std::move(a)), b_(std::move(b)), q_(std::move(q)), r_(std::move(r)),
      sigma_(sigma), beta_(beta) {
  const Eigen::Index d = a_.rows();
  if (d == 0 || a_.cols() != d || b_.rows() != d || b_.cols() == 0 ||
      q_.rows() != d || q_.cols() != d || r_.rows() != b_.cols() ||
      r_.cols() != b_.cols()) {
    fail_argument("LqrSystem: inconsistent matrix shapes");
  }
  if (!a_.allFinite() || !b_.allFinite() || !q_.allFinite() || !r_.allFinite() ||
      !std::isfinite(sigma_) || !std::isfinite(beta_)) {
    fail_argument("LqrSystem: non-finite parameter");
  }
  if (!is_symmetric(q_) || !is_symmetric(r_)) {
    fail_argument("LqrSystem: Q and R must be symmetric");
  }
  if (!is_negative_definite(q_) || !is_negative_definite(r_)) {
    fail_argument("LqrSystem: Q and R must be negative definite");
  }
  if (sigma_ < 0.0 || beta_ < 0.0) {
    fail_argument("LqrSystem: sigma and beta must be nonnegative");
  }
  if (sigma_ > 0.0 && !(beta_ > 0.0)) {
    fail_argument("LqrSystem: a noisy system needs beta > 0");
  }
  if (!hautus_stabilizable(a_, b_, beta_)) {
    fail_argument("LqrSystem: (A - beta/2 I, B) is not stabilizable");
  }
  if (!hautus_detectable(a_, q_, beta_)) {
    fail_argument("LqrSystem: (A - beta/2 I, Q) is not detectable");
  }
}

LqrSystem LqrSystem::scalar(double a, double b, double q, double r, double sigma,
                            double beta) {
  return LqrSystem(Eigen::MatrixXd::Constant(1, 1, a),
                   Eigen::MatrixXd::Constant(1, 1, b),
                   Eigen::MatrixXd::Constant(1, 1, q),
                   Eigen::MatrixXd::Constant(1, 1, r), sigma, beta);
}

MertonMarket::MertonMarket(double r, double r_b, double mu, double sigma,
                           double gamma_risk, double beta)
    : r_(r), r_b_(r_b), mu_(mu), sigma_(sigma), gamma_(gamma_risk), beta_(beta) {
  for (double v : {r, r_b, mu, sigma, gamma_risk, beta}) {
    if (!std::isfinite(v)) fail_argument("MertonMarket: non-finite parameter");
  }
  if (!(r_b > r)) fail_argument("MertonMarket: need r_b > r");
  if (!(sigma > 0.0)) fail_argument("MertonMarket: need sigma > 0");
  if (!(gamma_risk > 0.0) || gamma_risk == 1.0) {
    fail_argument("MertonMarket: need gamma > 0 and gamma != 1");
  }
  if (!(beta > 0.0)) fail_argument("MertonMarket: need beta > 0");
  // Optimal constant allocation; the value integral must converge there.
  const double var = gamma_risk * sigma * sigma;
  double a = (mu - r) / var;
  if (a > 1.0) a = std::max(1.0, (mu - r_b) / var);
  a = std::max(a, 0.0);
  const double v = sigma * a;
  const double denom = beta - (1.0 - gamma_risk) * drift(a) +
                       0.5 * gamma_risk * (1.0 - gamma_risk) * v * v;
  if (!(denom > 0.0)) {
    fail_argument("MertonMarket: discounted utility diverges at the optimal allocation");
  }
}

double MertonMarket::drift(double a) const {
  return a <= 1.0 ? a * mu_ + (1.0 - a) * r_ : a * mu_ - (a - 1.0) * r_b_;
}

double MertonMarket::reward(double wealth) const {
  if (!(wealth > 0.0)) fail_argument("MertonMarket::reward: wealth must be positive");
  return std::pow(wealth, 1.0 - gamma_) / (1.0 - gamma_);
}

TransitionKernel lqr_exact_transition(const LqrSystem& sys, double dt) {
  check_dt(dt, "lqr_exact_transition");
  const Eigen::Index d = sys.state_dim();
  TransitionKernel k;
  k.dt = dt;
  k.mean_state = mat_exp(sys.A(), dt);
  k.mean_action = dt * phi1(sys.A(), dt) * sys.B();
  const double s2 = sys.sigma() * sys.sigma();
  k.covariance = s2 > 0.0 ? Eigen::MatrixXd(s2 * dt * gram_integral(sys.A(), dt))
                          : Eigen::MatrixXd::Zero(d, d);
  return k;
}

TrajectoryBatch sample_lqr_batch(const LqrSystem& sys, double dt,
                                 const SamplingPlan& plan, int hold_steps,
                                 std::uint64_t seed) {
  return rollout_lqr(sys, dt, plan, ActionRule::kRandomHeld, hold_steps, nullptr,
                     seed, "sample_lqr_batch");
}

TrajectoryBatch sample_policy_lqr_batch(const LqrSystem& sys, double dt,
                                        const LinearPolicy& policy,
                                        const SamplingPlan& plan,
                                        std::uint64_t seed,
                                        int hold_steps) {
  return rollout_lqr(sys, dt, plan, ActionRule::kPolicy, hold_steps, &policy, seed,
                     "sample_policy_lqr_batch");
}

TrajectoryBatch sample_first_random_lqr_batch(const LqrSystem& sys, double dt,
                                              const LinearPolicy& policy,
                                              const SamplingPlan& plan,
                                              std::uint64_t seed) {
  return rollout_lqr(sys, dt, plan, ActionRule::kFirstRandom, 1, &policy, seed,
                     "sample_first_random_lqr_batch");
}

double merton_step(const MertonMarket& market, double wealth, double a, double dt,
                   double noise) {
  if (!(wealth > 0.0)) fail_argument("merton_step: wealth must be positive");
  if (!(a >= 0.0)) fail_argument("merton_step: allocation must be nonnegative");
  check_dt(dt, "merton_step");
  const double m = market.drift(a);
  const double v = market.volatility(a);
  return wealth * std::exp((m - 0.5 * v * v) * dt + v * std::sqrt(dt) * noise);
}

TrajectoryBatch sample_merton_batch(const MertonMarket& market, double dt,
                                    const SamplingPlan& plan, int hold_steps,
                                    std::uint64_t seed) {
  return rollout_merton(market, dt, plan, ActionRule::kRandomHeld, hold_steps,
                        nullptr, seed, "sample_merton_batch");
}

TrajectoryBatch sample_policy_merton_batch(const MertonMarket& market, double dt,
                                           const LinearPolicy& policy,
                                           const SamplingPlan& plan,
                                           std::uint64_t seed,
                                           int hold_steps) {
  return rollout_merton(market, dt, plan, ActionRule::kPolicy, hold_steps, &policy, seed,
                        "sample_policy_merton_batch");
}

TrajectoryBatch sample_first_random_merton_batch(const MertonMarket& market,
                                                 double dt,
                                                 const LinearPolicy& policy,
                                                 const SamplingPlan& plan,
                                                 std::uint64_t seed) {
  return rollout_merton(market, dt, plan, ActionRule::kFirstRandom, 1, &policy,
                        seed, "sample_first_random_merton_batch");
}

TrajectoryBatch LqrEnvironment::sample_random(double dt, const SamplingPlan& plan,
                                              int hold_steps,
                                              std::uint64_t seed) const {
  return sample_lqr_batch(sys_, dt, plan, hold_steps, seed);
}

TrajectoryBatch LqrEnvironment::sample_policy(double dt, const LinearPolicy& policy,
                                              const SamplingPlan& plan,
                                              int hold_steps,
                                              std::uint64_t seed) const {
  return sample_policy_lqr_batch(sys_, dt, policy, plan, seed, hold_steps);
}

TrajectoryBatch LqrEnvironment::sample_first_random(double dt,
                                                    const LinearPolicy& policy,
                                                    const SamplingPlan& plan,
                                                    std::uint64_t seed) const {
  return sample_first_random_lqr_batch(sys_, dt, policy, plan, seed);
}

IncrementMoments LqrEnvironment::held_moments(const Eigen::VectorXd& s,
                                              const Eigen::VectorXd& a, double dt,
                                              int k) const {
  if (k < 1) fail_argument("held_moments: k must be >= 1");
  // Holding a over k steps is one exact step of length k dt.
  const TransitionKernel kernel = lqr_exact_transition(sys_, k * dt);
  IncrementMoments out;
  out.mean = kernel.mean(s, a) - s;
  out.second = out.mean * out.mean.transpose() + kernel.covariance;
  return out;
}

IncrementMoments LqrEnvironment::policy_moments(const Eigen::VectorXd& s,
                                                const LinearPolicy& policy,
                                                double dt, int k) const {
  if (k < 1) fail_argument("policy_moments: k must be >= 1");
  const TransitionKernel kernel = lqr_exact_transition(sys_, dt);
  const Eigen::MatrixXd f = kernel.mean_state + kernel.mean_action * policy.K;
  Eigen::VectorXd mean = s;
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(s.size(), s.size());
  for (int j = 0; j < k; ++j) {
    mean = kernel.mean(mean, policy(mean));
    cov = f * cov * f.transpose() + kernel.covariance;
  }
  IncrementMoments out;
  out.mean = mean - s;
  out.second = out.mean * out.mean.transpose() + symmetrized(cov);
  return out;
}

TrajectoryBatch MertonEnvironment::sample_random(double dt, const SamplingPlan& plan,
                                                 int hold_steps,
                                                 std::uint64_t seed) const {
  return sample_merton_batch(market_, dt, plan, hold_steps, seed);
}

TrajectoryBatch MertonEnvironment::sample_policy(double dt, const LinearPolicy& policy,
                                                 const SamplingPlan& plan,
                                                 int hold_steps,
                                                 std::uint64_t seed) const {
  return sample_policy_merton_batch(market_, dt, policy, plan, seed, hold_steps);
}

TrajectoryBatch MertonEnvironment::sample_first_random(double dt,
                                                       const LinearPolicy& policy,
                                                       const SamplingPlan& plan,
                                                       std::uint64_t seed) const {
  return sample_first_random_merton_batch(market_, dt, policy, plan, seed);
}

IncrementMoments MertonEnvironment::held_moments(const Eigen::VectorXd& s,
                                                 const Eigen::VectorXd& a, double dt,
                                                 int k) const {
  if (k < 1) fail_argument("held_moments: k must be >= 1");
  const double w = s(0);
  const double alloc = std::max(a(0), 0.0);
  const double m = market_.drift(alloc);
  const double v = market_.volatility(alloc);
  const double t = k * dt;
  const double g1 = std::exp(m * t);
  IncrementMoments out;
  out.mean = Eigen::VectorXd::Constant(1, w * (g1 - 1.0));
  out.second = Eigen::MatrixXd::Constant(
      1, 1, w * w * (std::exp((2.0 * m + v * v) * t) - 2.0 * g1 + 1.0));
  return out;
}

IncrementMoments MertonEnvironment::policy_moments(const Eigen::VectorXd& s,
                                                   const LinearPolicy& policy,
                                                   double dt, int k) const {
  if (policy.K.size() != 1 || policy.K(0, 0) != 0.0) {
    fail_argument("MertonEnvironment::policy_moments: only constant allocations have closed-form moments");
  }
  return held_moments(s, policy.offset, dt, k);
}

}  // namespace phibe
