#include "phibe/coefficients.hpp"

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <memory>
#include <mutex>
#include <string>

#include "phibe/error.hpp"

namespace phibe {
namespace {

OrderCoefficients solve_vandermonde(int order) {
  Eigen::MatrixXd a(order, order);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(order);
  b(0) = 1.0;
  for (int k = 1; k <= order; ++k) {
    for (int j = 1; j <= order; ++j) {
      a(k - 1, j - 1) = std::pow(static_cast<double>(j), k);
    }
  }
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
  // rcond() is a cheap estimate; anything this small means the solve is
  // garbage rather than merely inaccurate.
  if (!(lu.rcond() > 1e-15)) {
    fail_numerical("bellman_order_coefficients: Vandermonde system of order " +
                   std::to_string(order) + " is numerically singular");
  }
  const Eigen::VectorXd x = lu.solve(b);
  OrderCoefficients out;
  out.order = order;
  out.coeffs.assign(x.data(), x.data() + order);
  for (double c : out.coeffs) {
    if (!std::isfinite(c)) {
      fail_numerical("bellman_order_coefficients: non-finite coefficient");
    }
  }
  return out;
}

}  // namespace

const OrderCoefficients& bellman_order_coefficients(int order) {
  if (order < 1 || order > kMaxOrder) {
    fail_argument("bellman_order_coefficients: order must be in [1, " +
                  std::to_string(kMaxOrder) + "], got " +
                  std::to_string(order));
  }
  static std::mutex mutex;
  static std::array<std::unique_ptr<OrderCoefficients>, kMaxOrder + 1> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto& slot = cache[static_cast<std::size_t>(order)];
  if (!slot) {
    slot = std::make_unique<OrderCoefficients>(solve_vandermonde(order));
  }
  return *slot;
}

double error_constant(int order) {
  const auto& a = bellman_order_coefficients(order);
  double sum = 0.0;
  for (int j = 1; j <= order; ++j) {
    sum += std::abs(a.coeffs[j - 1]) * std::pow(static_cast<double>(j), order + 1);
  }
  return sum / std::tgamma(order + 2.0);
}

}  // namespace phibe
