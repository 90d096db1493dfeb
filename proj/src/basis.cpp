#include "phibe/basis.hpp"

#include <cmath>
#include <string>

#include "phibe/error.hpp"

namespace phibe {
namespace {

bool is_integer(double p) { return p == std::floor(p); }

// s^p and its first two derivatives, with 0^0 = 1 and no 0^{-1} blow-ups for
// the integer exponents used by the quadratic bases.
double ipow(double x, double p) {
  if (p == 0.0) return 1.0;
  if (p == 1.0) return x;
  if (p == 2.0) return x * x;
  return std::pow(x, p);
}

BasisFunction state_monomial(int d, int i, int j, BasisBlock block, int m) {
  BasisFunction f;
  f.state_pow = Eigen::VectorXd::Zero(d);
  f.action_pow = Eigen::VectorXi::Zero(m);
  f.block = block;
  f.i = i;
  f.j = j;
  return f;
}

}  // namespace

BasisSet::BasisSet(int state_dim, int action_dim, std::vector<BasisFunction> fns)
    : state_dim_(state_dim), action_dim_(action_dim), fns_(std::move(fns)) {
  if (state_dim_ < 1 || action_dim_ < 0 || fns_.empty()) {
    fail_argument("BasisSet: need d >= 1, m >= 0 and at least one function");
  }
  for (const auto& f : fns_) {
    if (f.state_pow.size() != state_dim_ || f.action_pow.size() != action_dim_) {
      fail_argument("BasisSet: exponent vector size mismatch in " + f.name);
    }
    if (f.block == BasisBlock::kStatePower || f.block == BasisBlock::kPowerAction ||
        f.block == BasisBlock::kPowerActionSq) {
      positive_domain_ = true;
    }
    for (Eigen::Index k = 0; k < f.state_pow.size(); ++k) {
      if (!is_integer(f.state_pow(k)) || f.state_pow(k) < 0.0) positive_domain_ = true;
    }
  }
}

void BasisSet::check_point(const Eigen::VectorXd& s, const Eigen::VectorXd& a) const {
  if (s.size() != state_dim_) fail_argument("BasisSet: state dimension mismatch");
  if (action_dim_ > 0 && a.size() != action_dim_) {
    fail_argument("BasisSet: action dimension mismatch");
  }
  if (positive_domain_ && !(s.minCoeff() > 0.0)) {
    fail_argument("BasisSet: power basis evaluated at s <= 0");
  }
}

double BasisSet::action_factor(const BasisFunction& f, const Eigen::VectorXd& a) const {
  double v = 1.0;
  for (int k = 0; k < action_dim_; ++k) {
    const int p = f.action_pow(k);
    for (int r = 0; r < p; ++r) v *= a(k);
  }
  return v;
}

Eigen::VectorXd BasisSet::value(const Eigen::VectorXd& s, const Eigen::VectorXd& a) const {
  check_point(s, a);
  Eigen::VectorXd out(size());
  for (int n = 0; n < size(); ++n) {
    const auto& f = fns_[n];
    double v = action_factor(f, a);
    for (int i = 0; i < state_dim_; ++i) v *= ipow(s(i), f.state_pow(i));
    out(n) = v;
  }
  return out;
}

Eigen::MatrixXd BasisSet::gradient(const Eigen::VectorXd& s,
                                   const Eigen::VectorXd& a) const {
  check_point(s, a);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(size(), state_dim_);
  for (int n = 0; n < size(); ++n) {
    const auto& f = fns_[n];
    const double af = action_factor(f, a);
    for (int i = 0; i < state_dim_; ++i) {
      const double p = f.state_pow(i);
      if (p == 0.0) continue;
      double v = af * p * ipow(s(i), p - 1.0);
      for (int k = 0; k < state_dim_; ++k) {
        if (k != i) v *= ipow(s(k), f.state_pow(k));
      }
      out(n, i) = v;
    }
  }
  return out;
}

Eigen::MatrixXd BasisSet::hessian(int n, const Eigen::VectorXd& s,
                                  const Eigen::VectorXd& a) const {
  check_point(s, a);
  if (n < 0 || n >= size()) fail_argument("BasisSet::hessian: index out of range");
  const auto& f = fns_[n];
  const double af = action_factor(f, a);
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(state_dim_, state_dim_);
  for (int i = 0; i < state_dim_; ++i) {
    for (int j = i; j < state_dim_; ++j) {
      const double pi = f.state_pow(i);
      const double pj = f.state_pow(j);
      double v = af;
      if (i == j) {
        if (pi == 0.0 || pi == 1.0) continue;
        v *= pi * (pi - 1.0) * ipow(s(i), pi - 2.0);
      } else {
        if (pi == 0.0 || pj == 0.0) continue;
        v *= pi * ipow(s(i), pi - 1.0) * pj * ipow(s(j), pj - 1.0);
      }
      for (int k = 0; k < state_dim_; ++k) {
        if (k != i && k != j) v *= ipow(s(k), f.state_pow(k));
      }
      h(i, j) = v;
      h(j, i) = v;
    }
  }
  return h;
}

Eigen::VectorXd BasisSet::generator(const Eigen::VectorXd& s, const Eigen::VectorXd& drift,
                                    const Eigen::MatrixXd& diffusion) const {
  if (action_dim_ != 0) {
    fail_argument("BasisSet::generator: defined for value bases only");
  }
  Eigen::VectorXd out = gradient(s) * drift;
  if (diffusion.size() > 0) {
    for (int n = 0; n < size(); ++n) {
      out(n) += 0.5 * hessian(n, s).cwiseProduct(diffusion).sum();
    }
  }
  return out;
}

std::vector<std::string> BasisSet::names() const {
  std::vector<std::string> out;
  out.reserve(fns_.size());
  for (const auto& f : fns_) out.push_back(f.name);
  return out;
}

BasisSet quadratic_state_basis(int d, bool include_constant) {
  if (d < 1) fail_argument("quadratic_state_basis: d must be >= 1");
  std::vector<BasisFunction> fns;
  if (include_constant) {
    auto f = state_monomial(d, -1, -1, BasisBlock::kConstant, 0);
    f.name = "1";
    fns.push_back(f);
  }
  for (int i = 0; i < d; ++i) {
    auto f = state_monomial(d, i, i, BasisBlock::kStateQuadratic, 0);
    f.state_pow(i) = 2.0;
    f.name = "s" + std::to_string(i + 1) + "^2";
    fns.push_back(f);
  }
  for (int i = 0; i < d; ++i) {
    for (int j = i + 1; j < d; ++j) {
      auto f = state_monomial(d, i, j, BasisBlock::kStateQuadratic, 0);
      f.state_pow(i) = 1.0;
      f.state_pow(j) = 1.0;
      f.name = "s" + std::to_string(i + 1) + "*s" + std::to_string(j + 1);
      fns.push_back(f);
    }
  }
  return BasisSet(d, 0, std::move(fns));
}

BasisSet quadratic_state_action_basis(int d, int m, bool include_constant) {
  if (d < 1 || m < 1) fail_argument("quadratic_state_action_basis: d, m must be >= 1");
  std::vector<BasisFunction> fns;
  if (include_constant) {
    auto f = state_monomial(d, -1, -1, BasisBlock::kConstant, m);
    f.name = "1";
    fns.push_back(f);
  }
  auto a_name = [](int k) { return "a" + std::to_string(k + 1); };
  auto s_name = [](int i) { return "s" + std::to_string(i + 1); };
  for (int k = 0; k < m; ++k) {
    auto f = state_monomial(d, k, k, BasisBlock::kActionQuadratic, m);
    f.action_pow(k) = 2;
    f.name = a_name(k) + "^2";
    fns.push_back(f);
  }
  for (int k = 0; k < m; ++k) {
    for (int l = k + 1; l < m; ++l) {
      auto f = state_monomial(d, k, l, BasisBlock::kActionQuadratic, m);
      f.action_pow(k) = 1;
      f.action_pow(l) = 1;
      f.name = a_name(k) + "*" + a_name(l);
      fns.push_back(f);
    }
  }
  for (int i = 0; i < d; ++i) {
    for (int k = 0; k < m; ++k) {
      auto f = state_monomial(d, i, k, BasisBlock::kCross, m);
      f.state_pow(i) = 1.0;
      f.action_pow(k) = 1;
      f.name = s_name(i) + "*" + a_name(k);
      fns.push_back(f);
    }
  }
  for (int i = 0; i < d; ++i) {
    auto f = state_monomial(d, i, i, BasisBlock::kStateQuadratic, m);
    f.state_pow(i) = 2.0;
    f.name = s_name(i) + "^2";
    fns.push_back(f);
  }
  for (int i = 0; i < d; ++i) {
    for (int j = i + 1; j < d; ++j) {
      auto f = state_monomial(d, i, j, BasisBlock::kStateQuadratic, m);
      f.state_pow(i) = 1.0;
      f.state_pow(j) = 1.0;
      f.name = s_name(i) + "*" + s_name(j);
      fns.push_back(f);
    }
  }
  return BasisSet(d, m, std::move(fns));
}

BasisSet merton_value_basis(double power) {
  if (!(power > 0.0) || !std::isfinite(power)) {
    fail_argument("merton_value_basis: power must be positive");
  }
  auto f = state_monomial(1, 0, -1, BasisBlock::kStatePower, 0);
  f.state_pow(0) = power;
  f.name = "s^" + std::to_string(power);
  return BasisSet(1, 0, {f});
}

BasisSet merton_q_basis(double power) {
  if (!(power > 0.0) || !std::isfinite(power)) {
    fail_argument("merton_q_basis: power must be positive");
  }
  const std::string p = "s^" + std::to_string(power);
  std::vector<BasisFunction> fns;
  const BasisBlock blocks[3] = {BasisBlock::kStatePower, BasisBlock::kPowerAction,
                                BasisBlock::kPowerActionSq};
  for (int r = 0; r < 3; ++r) {
    auto f = state_monomial(1, 0, -1, blocks[r], 1);
    f.state_pow(0) = power;
    f.action_pow(0) = r;
    f.name = r == 0 ? p : (r == 1 ? p + "*a" : p + "*a^2");
    fns.push_back(f);
  }
  return BasisSet(1, 1, std::move(fns));
}

}  // namespace phibe
