#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <sstream>

#include "phibe/batch_io.hpp"
#include "phibe/environments.hpp"
#include "phibe/error.hpp"
#include "phibe/matcore.hpp"
#include "phibe/oracles.hpp"

using namespace phibe;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

VectorXd v1(double x) { return VectorXd::Constant(1, x); }

SamplingPlan point_plan(int n, int steps, double s, double a) {
  return SamplingPlan{n, steps, Box::uniform(1, s, s), Box::uniform(1, a, a)};
}

MertonMarket merton_case1() { return MertonMarket(0.02, 0.05, 0.08, 0.2, 0.5, 0.2); }

}  // namespace

TEST_CASE("LqrSystem validation") {
  CHECK_NOTHROW(LqrSystem::scalar(1, 1, -1, -1, 0, 0));
  CHECK_THROWS_AS(LqrSystem::scalar(1, 1, 1, -1, 0, 0), Error);   // Q not negative
  CHECK_THROWS_AS(LqrSystem::scalar(1, 1, -1, -1, 1, 0), Error);  // noise without discount
  CHECK_THROWS_AS(LqrSystem::scalar(1, 0, -1, -1, 0, 0), Error);  // not stabilizable
  CHECK_THROWS_AS(LqrSystem(MatrixXd::Identity(2, 2), MatrixXd::Identity(2, 1),
                            -MatrixXd::Identity(3, 3), -MatrixXd::Identity(1, 1), 0, 0),
                  Error);
}

TEST_CASE("exact transition examples") {
  const LqrSystem integrator(MatrixXd::Zero(2, 2), MatrixXd::Identity(2, 2),
                             -MatrixXd::Identity(2, 2), -MatrixXd::Identity(2, 2), 0, 0);
  const auto k0 = lqr_exact_transition(integrator, 0.3);
  const VectorXd s = VectorXd::Constant(2, 1.5);
  const VectorXd a = VectorXd::Constant(2, -2.0);
  CHECK((k0.mean(s, a) - (s + 0.3 * a)).norm() < 1e-15);
  CHECK(k0.covariance.norm() == 0.0);

  const auto k1 = lqr_exact_transition(LqrSystem::scalar(-1, 0.5, -1, -1, 0, 1), 0.1);
  CHECK(k1.mean(v1(2.0), v1(3.0))(0) ==
        doctest::Approx(std::exp(-0.1) * 2.0 + 0.5 * (1.0 - std::exp(-0.1)) * 3.0)
            .epsilon(1e-14));

  const auto k2 = lqr_exact_transition(LqrSystem::scalar(-1, 0.5, -1, -1, 1, 1), 0.1);
  CHECK(k2.covariance(0, 0) == doctest::Approx((1.0 - std::exp(-0.2)) / 2.0).epsilon(1e-13));
}

TEST_CASE("one-step kernels compose into the i-step kernel") {
  MatrixXd a(2, 2), b(2, 1);
  a << -0.5, 1.0, -0.3, -1.2;
  b << 0.4, 1.0;
  const LqrSystem sys(a, b, -MatrixXd::Identity(2, 2), -MatrixXd::Identity(1, 1), 0.7, 1.0);
  const double dt = 0.2;
  const auto one = lqr_exact_transition(sys, dt);
  for (int i = 2; i <= 4; ++i) {
    const auto many = lqr_exact_transition(sys, i * dt);
    MatrixXd ms = MatrixXd::Identity(2, 2);
    MatrixXd ma = MatrixXd::Zero(2, 1);
    MatrixXd cov = MatrixXd::Zero(2, 2);
    for (int j = 0; j < i; ++j) {
      ma = one.mean_state * ma + one.mean_action;
      cov = one.mean_state * cov * one.mean_state.transpose() + one.covariance;
      ms = one.mean_state * ms;
    }
    CHECK((ms - many.mean_state).norm() < 1e-10);
    CHECK((ma - many.mean_action).norm() < 1e-10);
    CHECK((cov - many.covariance).norm() < 1e-10);
  }
}

TEST_CASE("deterministic batches replay the kernel exactly") {
  const LqrSystem sys = LqrSystem::scalar(1, 1, -1, -1, 0, 0);
  const SamplingPlan plan{1, 3, Box::uniform(1, -3, 3), Box::uniform(1, -3, 3)};
  const auto batch = sample_lqr_batch(sys, 0.5, plan, 1, 42);
  const auto k = lqr_exact_transition(sys, 0.5);
  const auto& tr = batch.trajectories[0];
  REQUIRE(tr.states.rows() == 4);
  for (int j = 0; j < 3; ++j) {
    const VectorXd next = k.mean(tr.states.row(j).transpose(), tr.actions.row(j).transpose());
    CHECK(std::abs(next(0) - tr.states(j + 1, 0)) < 1e-14);
    CHECK(tr.rewards(j) ==
          sys.reward(tr.states.row(j).transpose(), tr.actions.row(j).transpose()));
  }
}

TEST_CASE("seed replay is bit-identical and seeds differ") {
  const LqrSystem sys = LqrSystem::scalar(-1, 0.5, -1, -1, 0.5, 1);
  const SamplingPlan plan{20, 5, Box::uniform(1, -3, 3), Box::uniform(1, -3, 3)};
  const auto a = sample_lqr_batch(sys, 0.1, plan, 2, 9);
  const auto b = sample_lqr_batch(sys, 0.1, plan, 2, 9);
  const auto c = sample_lqr_batch(sys, 0.1, plan, 2, 10);
  std::ostringstream sa, sb, sc;
  write_batch_csv(a, sa);
  write_batch_csv(b, sb);
  write_batch_csv(c, sc);
  CHECK(sa.str() == sb.str());
  CHECK(sa.str() != sc.str());
}

TEST_CASE("actions are held for hold_steps") {
  const LqrSystem sys = LqrSystem::scalar(-1, 0.5, -1, -1, 0, 1);
  const SamplingPlan plan{5, 6, Box::uniform(1, -3, 3), Box::uniform(1, -3, 3)};
  const auto batch = sample_lqr_batch(sys, 0.1, plan, 3, 1);
  CHECK(batch.hold_steps == 3);
  for (const auto& tr : batch.trajectories) {
    CHECK(tr.actions(0, 0) == tr.actions(2, 0));
    CHECK(tr.actions(3, 0) == tr.actions(5, 0));
    CHECK(tr.actions(0, 0) != tr.actions(3, 0));
  }
}

TEST_CASE("one-step Monte Carlo moments match the kernel") {
  const LqrSystem sys = LqrSystem::scalar(-1, 0.5, -1, -1, 1, 1);
  const double dt = 0.1, s0 = 1.3, a0 = -0.8;
  const int n = 100000;
  const auto batch = sample_lqr_batch(sys, dt, point_plan(n, 1, s0, a0), 1, 123);
  double mean = 0.0, sq = 0.0;
  for (const auto& tr : batch.trajectories) {
    mean += tr.states(1, 0);
    sq += tr.states(1, 0) * tr.states(1, 0);
  }
  mean /= n;
  const double var = sq / n - mean * mean;
  const auto k = lqr_exact_transition(sys, dt);
  const double mu = k.mean(v1(s0), v1(a0))(0);
  const double sigma2 = k.covariance(0, 0);
  CHECK(std::abs(mean - mu) < 4.0 * std::sqrt(sigma2 / n));
  // Standard error of the sample variance of a Gaussian: sigma^2 sqrt(2/n).
  CHECK(std::abs(var - sigma2) < 4.0 * sigma2 * std::sqrt(2.0 / n));
}

TEST_CASE("policy rollouts") {
  const LqrSystem frozen = LqrSystem::scalar(0, 1, -1, -1, 0, 0);
  const SamplingPlan plan{3, 4, Box::uniform(1, -3, 3), Box::uniform(1, -3, 3)};
  const auto b0 = sample_policy_lqr_batch(frozen, 0.1, LinearPolicy(MatrixXd::Zero(1, 1)),
                                          plan, 5);
  for (const auto& tr : b0.trajectories) {
    CHECK((tr.states.array() == tr.states(0, 0)).all());
  }

  // Stable closed loop decays at least as fast as its slowest mode.
  MatrixXd a(2, 2), b = MatrixXd::Identity(2, 2);
  a << 0.5, 1.0, 0.0, 0.2;
  const LqrSystem sys(a, b, -MatrixXd::Identity(2, 2), -MatrixXd::Identity(2, 2), 0, 0);
  const MatrixXd k = -MatrixXd::Identity(2, 2) * 2.0;
  const double dt = 0.1;
  const int steps = 20;
  const auto batch = sample_policy_lqr_batch(sys, dt, LinearPolicy(k),
                                             SamplingPlan{10, steps, Box::uniform(2, -3, 3),
                                                          Box::uniform(2, -1, 1)},
                                             8);
  const double lam = spectral_abscissa(a + b * k);
  for (const auto& tr : batch.trajectories) {
    // Non-normal transient bounded by the closed-loop condition factor.
    CHECK(tr.states.row(steps).norm() <=
          5.0 * tr.states.row(0).norm() * std::exp(lam * steps * dt) + 1e-12);
  }

  const LqrSystem unstable = LqrSystem::scalar(5, 1, -1, -1, 0, 0);
  try {
    sample_policy_lqr_batch(unstable, 1.0, LinearPolicy(MatrixXd::Constant(1, 1, 1.0)),
                            SamplingPlan{2, 50, Box::uniform(1, 1, 2), Box::uniform(1, 0, 0)},
                            3);
    FAIL("expected blow-up");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kNumerical);
    CHECK(std::string(e.what()).find("blow-up in trajectory 0") != std::string::npos);
  }
}

TEST_CASE("Riemann sum of rewards approaches the optimal value as dt shrinks") {
  const LqrSystem sys = LqrSystem::scalar(1, 1, -1, -1, 0, 0);
  const auto opt = lqr_optimal(sys);
  const double dt = 1e-3;
  const int steps = 20000;
  const auto batch = sample_policy_lqr_batch(
      sys, dt, opt.policy, SamplingPlan{1, steps, Box::uniform(1, 2, 2), Box::uniform(1, 0, 0)},
      1);
  const double total = batch.trajectories[0].rewards.sum() * dt;
  CHECK(total == doctest::Approx(opt.value(v1(2.0))).epsilon(5e-3));
}

TEST_CASE("first-random batches switch to the policy after one step") {
  const LqrSystem sys = LqrSystem::scalar(-1, 0.5, -1, -1, 0, 1);
  const LinearPolicy pol(MatrixXd::Constant(1, 1, -0.7));
  const auto batch = sample_first_random_lqr_batch(
      sys, 0.1, pol, SamplingPlan{4, 5, Box::uniform(1, -3, 3), Box::uniform(1, -3, 3)}, 2);
  for (const auto& tr : batch.trajectories) {
    CHECK(tr.actions(0, 0) != doctest::Approx(-0.7 * tr.states(0, 0)));
    for (int j = 1; j < 5; ++j) {
      CHECK(tr.actions(j, 0) == doctest::Approx(-0.7 * tr.states(j, 0)));
    }
  }
}

TEST_CASE("Merton step examples") {
  const MertonMarket m = merton_case1();
  CHECK(merton_step(m, 2.0, 0.0, 0.5, 1.7) == doctest::Approx(2.0 * std::exp(0.02 * 0.5)));
  CHECK(merton_step(m, 2.0, 1.0, 0.5, 0.0) ==
        doctest::Approx(2.0 * std::exp((0.08 - 0.02) * 0.5)));
  CHECK(m.drift(1.5) == doctest::Approx(0.095));
  CHECK(m.reward(4.0) == doctest::Approx(4.0));
  CHECK_THROWS_AS(merton_step(m, 0.0, 1.0, 0.1, 0.0), Error);
  CHECK_THROWS_AS(merton_step(m, 1.0, -0.1, 0.1, 0.0), Error);
  CHECK_THROWS_AS(MertonMarket(0.05, 0.02, 0.08, 0.2, 0.5, 0.2), Error);
}

TEST_CASE("Merton one-step utility moment") {
  const MertonMarket m = merton_case1();
  const double w = 2.0, a = 1.5, dt = 1.0 / 12.0;
  const int n = 100000;
  const auto batch =
      sample_merton_batch(m, dt, SamplingPlan{n, 1, Box::uniform(1, w, w), Box::uniform(1, a, a)},
                          1, 77);
  double sum = 0.0, sq = 0.0;
  for (const auto& tr : batch.trajectories) {
    const double u = std::sqrt(tr.states(1, 0));
    sum += u;
    sq += u * u;
  }
  const double mean = sum / n;
  const double se = std::sqrt((sq / n - mean * mean) / n);
  const double g = 0.5, mm = m.drift(a), v = m.volatility(a);
  const double expected =
      std::pow(w, 1 - g) * std::exp(((1 - g) * mm - 0.5 * g * (1 - g) * v * v) * dt);
  CHECK(std::abs(mean - expected) < 4.0 * se);
}

TEST_CASE("exact increment moments match Monte Carlo") {
  const MertonEnvironment env(merton_case1());
  const double w = 1.7, a = 1.3, dt = 1.0 / 12.0;
  const int n = 200000;
  const auto batch = env.sample_random(
      dt, SamplingPlan{n, 2, Box::uniform(1, w, w), Box::uniform(1, a, a)}, 2, 5);
  double m1 = 0.0, m2 = 0.0;
  for (const auto& tr : batch.trajectories) {
    const double d = tr.states(2, 0) - w;
    m1 += d;
    m2 += d * d;
  }
  m1 /= n;
  m2 /= n;
  const auto mom = env.held_moments(v1(w), v1(a), dt, 2);
  const double se = std::sqrt((m2 - m1 * m1) / n);
  CHECK(std::abs(m1 - mom.mean(0)) < 4.0 * se);
  CHECK(mom.second(0, 0) == doctest::Approx(m2).epsilon(0.02));

  const LqrEnvironment lenv(LqrSystem::scalar(-1, 0.5, -1, -1, 0.8, 1));
  const LinearPolicy pol(MatrixXd::Constant(1, 1, -1.2));
  const auto pb = lenv.sample_policy(
      0.1, pol, SamplingPlan{n, 3, Box::uniform(1, 1.1, 1.1), Box::uniform(1, 0, 0)}, 1, 6);
  double p1 = 0.0, p2 = 0.0;
  for (const auto& tr : pb.trajectories) {
    const double d = tr.states(3, 0) - 1.1;
    p1 += d;
    p2 += d * d;
  }
  p1 /= n;
  p2 /= n;
  const auto pm = lenv.policy_moments(v1(1.1), pol, 0.1, 3);
  CHECK(std::abs(p1 - pm.mean(0)) < 4.0 * std::sqrt((p2 - p1 * p1) / n));
  CHECK(pm.second(0, 0) == doctest::Approx(p2).epsilon(0.02));
}

TEST_CASE("batch CSV round trip") {
  const LqrSystem sys(MatrixXd::Identity(2, 2) * -0.5, MatrixXd::Identity(2, 2),
                      -MatrixXd::Identity(2, 2), -MatrixXd::Identity(2, 2), 0.3, 1.0);
  const auto batch = sample_lqr_batch(
      sys, 0.25, SamplingPlan{3, 4, Box::uniform(2, -3, 3), Box::uniform(2, -1, 1)}, 2, 99);
  std::ostringstream csv;
  write_batch_csv(batch, csv);
  std::istringstream in(csv.str());
  const auto back = read_batch(batch_header_json(batch), in);
  CHECK(back.seed == 99);
  CHECK(back.hold_steps == 2);
  REQUIRE(back.trajectories.size() == 3);
  for (std::size_t l = 0; l < 3; ++l) {
    CHECK(back.trajectories[l].states == batch.trajectories[l].states);
    CHECK(back.trajectories[l].actions == batch.trajectories[l].actions);
    CHECK(back.trajectories[l].rewards == batch.trajectories[l].rewards);
  }
  CHECK(csv.str().rfind("traj_id,step,s_1,s_2,a_1,a_2,reward\n", 0) == 0);
}
