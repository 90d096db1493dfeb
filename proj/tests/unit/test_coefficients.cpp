#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "phibe/coefficients.hpp"
#include "phibe/error.hpp"
#include "rational.hpp"

using phibe::bellman_order_coefficients;
using phibe::error_constant;

TEST_CASE("order 1 is the forward difference") {
  const auto& c = bellman_order_coefficients(1);
  CHECK(c.order == 1);
  REQUIRE(c.coeffs.size() == 1);
  CHECK(c.coeffs[0] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("orders 2 and 3 match exact rational elimination") {
  for (int order : {2, 3, 4, 5}) {
    const auto exact = exact_order_coefficients(order);
    const auto& c = bellman_order_coefficients(order);
    REQUIRE(c.coeffs.size() == static_cast<std::size_t>(order));
    for (int j = 0; j < order; ++j) {
      CHECK(std::abs(c.coeffs[j] - exact[j].to_double()) < 1e-12);
    }
  }
  CHECK(exact_order_coefficients(2)[0] == Rational(2));
  CHECK(exact_order_coefficients(2)[1] == Rational(-1, 2));
  CHECK(exact_order_coefficients(3)[2] == Rational(1, 3));
}

TEST_CASE("moment identities hold for orders 1..6") {
  for (int i = 1; i <= 6; ++i) {
    const auto& c = bellman_order_coefficients(i).coeffs;
    for (int k = 1; k <= i; ++k) {
      double s = 0.0;
      for (int j = 1; j <= i; ++j) s += c[j - 1] * std::pow(j, k);
      CHECK(std::abs(s - (k == 1 ? 1.0 : 0.0)) < 1e-10);
    }
  }
}

TEST_CASE("stencil recovers the derivative of a polynomial path") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int i = 1; i <= 6; ++i) {
    const auto& c = bellman_order_coefficients(i).coeffs;
    std::vector<double> poly(i + 1);
    for (auto& p : poly) p = u(rng);
    const double dt = 0.3;
    auto path = [&](double t) {
      double v = 0.0;
      for (int k = i; k >= 0; --k) v = v * t + poly[k];
      return v;
    };
    double est = 0.0;
    for (int j = 1; j <= i; ++j) est += c[j - 1] * (path(j * dt) - path(0.0));
    est /= dt;
    CHECK(est == doctest::Approx(poly[1]).epsilon(1e-9));
  }
}

TEST_CASE("error constants") {
  CHECK(error_constant(1) == doctest::Approx(0.5));
  CHECK(error_constant(2) == doctest::Approx(1.0));
  CHECK(error_constant(3) == doctest::Approx(2.25));
}

TEST_CASE("invalid orders are rejected") {
  CHECK_THROWS_AS(bellman_order_coefficients(0), phibe::Error);
  CHECK_THROWS_AS(bellman_order_coefficients(-3), phibe::Error);
  CHECK_THROWS_AS(error_constant(0), phibe::Error);
  try {
    bellman_order_coefficients(0);
  } catch (const phibe::Error& e) {
    CHECK(e.kind() == phibe::ErrorKind::kInvalidArgument);
  }
}

TEST_CASE("cached results are stable references") {
  const auto* a = &bellman_order_coefficients(4);
  const auto* b = &bellman_order_coefficients(4);
  CHECK(a == b);
}
