#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "phibe/basis.hpp"
#include "phibe/error.hpp"

using namespace phibe;
using Eigen::VectorXd;

namespace {

// Central differences of value (for gradients) and of gradient (for Hessians).
void check_derivatives(const BasisSet& basis, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::uniform_real_distribution<double> ua(-2.0, 2.0);
  const double h = 1e-5;
  for (int trial = 0; trial < 100; ++trial) {
    VectorXd s(basis.state_dim());
    for (int i = 0; i < s.size(); ++i) s(i) = u(rng);
    VectorXd a(basis.action_dim());
    for (int i = 0; i < a.size(); ++i) a(i) = ua(rng);
    const Eigen::MatrixXd g = basis.gradient(s, a);
    for (int i = 0; i < s.size(); ++i) {
      VectorXd sp = s, sm = s;
      sp(i) += h;
      sm(i) -= h;
      const VectorXd fd = (basis.value(sp, a) - basis.value(sm, a)) / (2 * h);
      const Eigen::MatrixXd gd = (basis.gradient(sp, a) - basis.gradient(sm, a)) / (2 * h);
      for (int n = 0; n < basis.size(); ++n) {
        CHECK(std::abs(fd(n) - g(n, i)) <= 1e-6 * std::max(1.0, std::abs(g(n, i))));
        const Eigen::MatrixXd hess = basis.hessian(n, s, a);
        for (int j = 0; j < s.size(); ++j) {
          CHECK(std::abs(gd(n, j) - hess(i, j)) <= 1e-6 * std::max(1.0, std::abs(hess(i, j))));
        }
      }
    }
  }
}

}  // namespace

TEST_CASE("quadratic state basis layout") {
  const auto b1 = quadratic_state_basis(1, false);
  CHECK(b1.size() == 1);
  CHECK(b1.names() == std::vector<std::string>{"s1^2"});
  const auto b2 = quadratic_state_basis(2, true);
  CHECK(b2.size() == 4);
  CHECK(b2.names() == std::vector<std::string>{"1", "s1^2", "s2^2", "s1*s2"});
  const VectorXd s = (VectorXd(2) << 2.0, 3.0).finished();
  const auto g = b2.gradient(s);
  CHECK(g(3, 0) == 3.0);
  CHECK(g(3, 1) == 2.0);
  CHECK(b2.value(s)(0) == 1.0);
}

TEST_CASE("quadratic state-action basis layout") {
  const auto q1 = quadratic_state_action_basis(1, 1, false);
  CHECK(q1.names() == std::vector<std::string>{"a1^2", "s1*a1", "s1^2"});
  CHECK(q1.functions()[0].block == BasisBlock::kActionQuadratic);
  CHECK(q1.functions()[1].block == BasisBlock::kCross);
  CHECK(q1.functions()[2].block == BasisBlock::kStateQuadratic);
  const auto q2 = quadratic_state_action_basis(2, 2, true);
  CHECK(q2.size() == 11);
  const VectorXd s = VectorXd::Constant(1, 0.7);
  const VectorXd a = VectorXd::Constant(1, 1.3);
  CHECK(q1.hessian(0, s, a).norm() == 0.0);
  CHECK(q1.value(s, a)(1) == doctest::Approx(0.91));
}

TEST_CASE("Merton bases") {
  const auto v = merton_value_basis();
  const auto q = merton_q_basis();
  CHECK(v.size() == 1);
  CHECK(q.size() == 3);
  const VectorXd s = VectorXd::Constant(1, 4.0);
  CHECK(v.value(s)(0) == doctest::Approx(2.0));
  CHECK(v.gradient(s)(0, 0) == doctest::Approx(0.25));
  CHECK(v.hessian(0, s)(0, 0) == doctest::Approx(-0.03125));
  const VectorXd s1 = VectorXd::Constant(1, 1.0);
  const VectorXd a = VectorXd::Constant(1, 2.0);
  const VectorXd qv = q.value(s1, a);
  CHECK(qv(0) == 1.0);
  CHECK(qv(1) == 2.0);
  CHECK(qv(2) == 4.0);
  CHECK_THROWS_AS(v.value(VectorXd::Constant(1, 0.0)), Error);
  CHECK_THROWS_AS(v.value(VectorXd::Constant(1, -1.0)), Error);
}

TEST_CASE("analytic derivatives agree with finite differences") {
  std::mt19937_64 rng(21);
  check_derivatives(quadratic_state_basis(1, true), rng, -3, 3);
  check_derivatives(quadratic_state_basis(3, true), rng, -3, 3);
  check_derivatives(quadratic_state_action_basis(2, 2, true), rng, -3, 3);
  check_derivatives(merton_value_basis(), rng, 0.2, 6);
  check_derivatives(merton_q_basis(0.3), rng, 0.2, 6);
}

TEST_CASE("generator contracts drift and diffusion") {
  const auto b = quadratic_state_basis(2, true);
  const VectorXd s = (VectorXd(2) << 1.0, -2.0).finished();
  const VectorXd drift = (VectorXd(2) << 0.5, 0.25).finished();
  Eigen::MatrixXd sig(2, 2);
  sig << 2.0, 0.3, 0.3, 1.0;
  const VectorXd g = b.generator(s, drift, sig);
  CHECK(g(0) == 0.0);
  CHECK(g(1) == doctest::Approx(2 * 1.0 * 0.5 + 0.5 * 2 * 2.0));
  CHECK(g(2) == doctest::Approx(2 * -2.0 * 0.25 + 0.5 * 2 * 1.0));
  CHECK(g(3) == doctest::Approx(-2.0 * 0.5 + 1.0 * 0.25 + 0.3));
  const VectorXd g0 = b.generator(s, drift, Eigen::MatrixXd());
  CHECK(g0(1) == doctest::Approx(1.0));
}

TEST_CASE("ordering is stable across constructions") {
  CHECK(quadratic_state_action_basis(2, 1, true).names() ==
        quadratic_state_action_basis(2, 1, true).names());
}
