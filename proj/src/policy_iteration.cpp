#include "phibe/policy_iteration.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ostream>

#include "json.hpp"
#include "phibe/error.hpp"
#include "phibe/matcore.hpp"
#include "phibe/rng.hpp"

namespace phibe {
namespace {

constexpr std::uint64_t kQBatchStream = 0x51;
constexpr std::uint64_t kPolicyStream = 1000;
constexpr std::uint64_t kBeStream = 2000;
constexpr std::uint64_t kFinalStream = 3000;

bool has_block(const BasisSet& psi, BasisBlock block) {
  for (const auto& f : psi.functions()) {
    if (f.block == block) return true;
  }
  return false;
}

struct PowerCoeffs {
  double linear = 0.0;
  double quadratic = 0.0;
};

PowerCoeffs power_coeffs(const QEstimate& q, const BasisSet& psi) {
  PowerCoeffs c;
  for (int n = 0; n < psi.size(); ++n) {
    const auto block = psi.functions()[n].block;
    if (block == BasisBlock::kPowerAction) c.linear += q.omega(n);
    if (block == BasisBlock::kPowerActionSq) c.quadratic += q.omega(n);
  }
  return c;
}

double vertex(const QEstimate& q, const BasisSet& psi) {
  const PowerCoeffs c = power_coeffs(q, psi);
  if (!(c.quadratic < 0.0)) {
    fail_numerical("non-concave q in action (a^2 coefficient " +
                   std::to_string(c.quadratic) + ")");
  }
  return -c.linear / (2.0 * c.quadratic);
}

double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
      .count();
}

double policy_change(const LinearPolicy& a, const LinearPolicy& b) {
  return std::sqrt((a.K - b.K).squaredNorm() + (a.offset - b.offset).squaredNorm());
}

}  // namespace

LinearPolicy improve_policy(const QEstimate& q, const BasisSet& psi,
                            const ActionConstraint& constraint) {
  if (q.omega.size() != psi.size()) {
    fail_argument("improve_policy: q coefficients do not match the basis");
  }
  if (has_block(psi, BasisBlock::kPowerActionSq)) {
    const double a = std::clamp(vertex(q, psi), constraint.a_min, constraint.a_max);
    return LinearPolicy::constant(psi.state_dim(), a);
  }
  if (!has_block(psi, BasisBlock::kActionQuadratic)) {
    fail_argument("improve_policy: basis has no action-quadratic block");
  }
  const int d = psi.state_dim();
  const int m = psi.action_dim();
  Eigen::MatrixXd waa = Eigen::MatrixXd::Zero(m, m);
  Eigen::MatrixXd wsa = Eigen::MatrixXd::Zero(d, m);
  for (int n = 0; n < psi.size(); ++n) {
    const auto& f = psi.functions()[n];
    const double w = q.omega(n);
    if (f.block == BasisBlock::kActionQuadratic) {
      if (f.i == f.j) {
        waa(f.i, f.i) += w;
      } else {
        waa(f.i, f.j) += 0.5 * w;
        waa(f.j, f.i) += 0.5 * w;
      }
    } else if (f.block == BasisBlock::kCross) {
      wsa(f.i, f.j) += w;
    }
  }
  if (!is_negative_definite(waa)) {
    fail_numerical("non-concave q in action (W_aa not negative definite)");
  }
  const Eigen::MatrixXd k = -(2.0 * waa).ldlt().solve(wsa.transpose());
  return LinearPolicy(k);
}

PiResult optimal_phibe_pi(const Environment& env, double dt, const BasisSet& phi,
                          const BasisSet& psi, const LinearPolicy& pi0,
                          const BatchPlan& plan, const PiOptions& options,
                          const IterateOracle& oracle) {
  if (options.iterations < 1) fail_argument("optimal_phibe_pi: need at least one iteration");
  const double beta = env.beta();
  const bool exact = options.moments == MomentSource::kExact;
  const bool power_basis = has_block(psi, BasisBlock::kPowerActionSq);

  const std::uint64_t q_seed = derive_seed(options.seed, kQBatchStream);
  const TrajectoryBatch bq = env.sample_random(dt, plan.q_plan, options.order, q_seed);
  const std::vector<Window> q_windows =
      exact ? exact_held_windows(bq, env, options.order, options.diffusion)
            : sampled_windows(bq, options.order, options.diffusion, options.q_windows);

  auto evaluate = [&](const LinearPolicy& policy, std::uint64_t seed) {
    const bool held = !exact && options.rollout == PolicyRollout::kHeldWindow;
    const TrajectoryBatch bpi =
        env.sample_policy(dt, policy, plan.policy_plan, held ? options.order : 1, seed);
    const std::vector<Window> w =
        !exact ? sampled_windows(bpi, options.order, options.diffusion,
                                 held ? WindowMode::kHeldOnly : WindowMode::kAll)
        : options.exact_hold_policy
            ? exact_held_windows(bpi, env, options.order, options.diffusion)
            : exact_policy_windows(bpi, env, policy, options.order, options.diffusion);
    return phibe_policy_evaluation(w, phi, beta);
  };

  auto fit_q = [&](const ValueEstimate& value, const Eigen::VectorXd& warm,
                   const WindowFilter& filter) {
    if (options.q_solver == QSolver::kGalerkin) {
      return phibe_q_galerkin(q_windows, psi, phi, value, dt, options.drift, filter);
    }
    const QSystem sys =
        assemble_q_system(q_windows, psi, phi, value, dt, options.drift, filter);
    const double alpha =
        options.gd_alpha > 0.0 ? options.gd_alpha : 1.0 / q_gram_lambda_max(sys);
    return phibe_q_gradient_descent(sys, warm, alpha, options.gd_stopping);
  };

  PiResult result;
  LinearPolicy policy = pi0;
  Eigen::VectorXd warm = Eigen::VectorXd::Zero(psi.size());
  int k = 1;
  try {
    for (; k <= options.iterations; ++k) {
      const auto start = std::chrono::steady_clock::now();
      const std::uint64_t seed = derive_seed(options.seed, kPolicyStream + k);
      const ValueEstimate value = evaluate(policy, seed);
      QEstimate q = fit_q(value, warm, {});
      LinearPolicy next;
      if (power_basis && options.constraint.branch_refit) {
        // The drift has a kink at the borrowing threshold; one quadratic in a
        // cannot fit both sides, so refit on the side holding the vertex.
        const ActionConstraint& c = options.constraint;
        const bool high = vertex(q, psi) > c.kink;
        q = fit_q(value, q.omega, [&](const Window& w) {
          return high ? w.action(0) > c.kink : w.action(0) <= c.kink;
        });
        const double lo = high ? c.kink : c.a_min;
        const double hi = high ? c.a_max : c.kink;
        next = LinearPolicy::constant(psi.state_dim(), std::clamp(vertex(q, psi), lo, hi));
      } else {
        next = improve_policy(q, psi, options.constraint);
      }
      warm = q.omega;

      IterationRecord rec;
      rec.iteration = k;
      rec.policy = next;
      rec.theta = value.theta;
      rec.omega = q.omega;
      rec.seed = seed;
      if (oracle) rec.metrics = oracle(next, value);
      rec.wall_ms = elapsed_ms(start);
      result.trace.records.push_back(std::move(rec));
      result.value = value;

      const bool settled = options.early_stop_tol > 0.0 &&
                           policy_change(next, policy) < options.early_stop_tol;
      policy = next;
      if (settled) break;
    }
    result.policy = policy;
    result.value = evaluate(policy, derive_seed(options.seed, kFinalStream));
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kNumerical) throw;
    result.completed = false;
    result.failure = "iteration " + std::to_string(std::min(k, options.iterations)) +
                     ": " + e.what();
    result.policy = policy;
  }
  return result;
}

PiResult optimal_be_pi(const Environment& env, double dt, const BasisSet& phi,
                       const BasisSet& psi, const LinearPolicy& pi0,
                       const BatchPlan& plan, const PiOptions& options,
                       const IterateOracle& oracle) {
  if (options.iterations < 1) fail_argument("optimal_be_pi: need at least one iteration");
  const double beta = env.beta();
  PiResult result;
  LinearPolicy policy = pi0;
  int k = 1;
  try {
    for (; k <= options.iterations; ++k) {
      const auto start = std::chrono::steady_clock::now();
      const std::uint64_t seed = derive_seed(options.seed, kBeStream + k);
      const TrajectoryBatch batch = env.sample_first_random(dt, policy, plan.q_plan, seed);
      const QEstimate q =
          be_q_evaluation(batch, psi, beta, options.discount, options.be_next, &policy);
      const LinearPolicy next = improve_policy(q, psi, options.constraint);

      IterationRecord rec;
      rec.iteration = k;
      rec.policy = next;
      rec.omega = q.omega;
      rec.seed = seed;
      if (oracle) rec.metrics = oracle(next, ValueEstimate{});
      rec.wall_ms = elapsed_ms(start);
      result.trace.records.push_back(std::move(rec));

      const bool settled = options.early_stop_tol > 0.0 &&
                           policy_change(next, policy) < options.early_stop_tol;
      policy = next;
      if (settled) break;
    }
    result.policy = policy;
    const TrajectoryBatch final_batch = env.sample_policy(
        dt, policy, plan.policy_plan, 1, derive_seed(options.seed, kFinalStream));
    result.value = be_policy_evaluation(final_batch, phi, beta, options.discount);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kNumerical) throw;
    result.completed = false;
    result.failure = "iteration " + std::to_string(std::min(k, options.iterations)) +
                     ": " + e.what();
    result.policy = policy;
  }
  return result;
}

std::string trace_to_json(const IterationTrace& trace, bool include_wall_time) {
  using nlohmann::ordered_json;
  auto vec = [](const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
  };
  ordered_json records = ordered_json::array();
  for (const auto& r : trace.records) {
    ordered_json j;
    j["iteration"] = r.iteration;
    ordered_json k = ordered_json::array();
    for (Eigen::Index i = 0; i < r.policy.K.rows(); ++i) {
      k.push_back(vec(r.policy.K.row(i).transpose()));
    }
    j["K"] = k;
    j["offset"] = vec(r.policy.offset);
    j["theta"] = vec(r.theta);
    j["omega"] = vec(r.omega);
    ordered_json m = ordered_json::object();
    for (const auto& metric : r.metrics) m[metric.name] = metric.value;
    j["metrics"] = m;
    j["seed"] = r.seed;
    if (include_wall_time) j["wall_ms"] = r.wall_ms;
    records.push_back(j);
  }
  ordered_json out;
  out["records"] = records;
  return out.dump(2);
}

void write_trace_csv(const IterationTrace& trace, std::ostream& out) {
  char buf[32];
  out << "iteration,metric,value\n";
  for (const auto& r : trace.records) {
    for (Eigen::Index i = 0; i < r.policy.K.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", r.policy.K(i % r.policy.K.rows(), i / r.policy.K.rows()));
      out << r.iteration << ",K_" << i << ',' << buf << '\n';
    }
    for (Eigen::Index i = 0; i < r.policy.offset.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", r.policy.offset(i));
      out << r.iteration << ",offset_" << i << ',' << buf << '\n';
    }
    for (const auto& metric : r.metrics) {
      std::snprintf(buf, sizeof buf, "%.17g", metric.value);
      out << r.iteration << ',' << metric.name << ',' << buf << '\n';
    }
  }
}

}  // namespace phibe
