#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace phibe {

/// Role of a basis function, used by closed-form policy improvement.
enum class BasisBlock {
  kConstant,         // 1
  kStateQuadratic,   // s_i s_j
  kCross,            // s_i a_k
  kActionQuadratic,  // a_k a_l
  kStatePower,       // s^p
  kPowerAction,      // s^p a
  kPowerActionSq,    // s^p a^2
};

/// One separable term: prod_i s_i^{state_pow(i)} * prod_k a_k^{action_pow(k)}.
/// Non-integer state powers restrict the domain to s > 0.
struct BasisFunction {
  Eigen::VectorXd state_pow;
  Eigen::VectorXi action_pow;
  BasisBlock block;
  int i = -1;  // first index of the block (state or action)
  int j = -1;  // second index (state or action), -1 if unused
  std::string name;
};

class BasisSet {
 public:
  BasisSet(int state_dim, int action_dim, std::vector<BasisFunction> fns);

  int state_dim() const { return state_dim_; }
  /// 0 for value bases.
  int action_dim() const { return action_dim_; }
  int input_dim() const { return state_dim_ + action_dim_; }
  int size() const { return static_cast<int>(fns_.size()); }
  const std::vector<BasisFunction>& functions() const { return fns_; }
  bool positive_domain() const { return positive_domain_; }

  /// Values at (s, a); `a` is ignored (may be empty) for value bases.
  Eigen::VectorXd value(const Eigen::VectorXd& s,
                        const Eigen::VectorXd& a = Eigen::VectorXd()) const;
  /// Row n is the state gradient of function n (size() x d).
  Eigen::MatrixXd gradient(const Eigen::VectorXd& s,
                           const Eigen::VectorXd& a = Eigen::VectorXd()) const;
  /// State Hessian of function n (d x d).
  Eigen::MatrixXd hessian(int n, const Eigen::VectorXd& s,
                          const Eigen::VectorXd& a = Eigen::VectorXd()) const;
  /// b . grad phi_n + 1/2 Sigma : hess phi_n for every n; the Sigma term is
  /// skipped when `diffusion` is empty.
  Eigen::VectorXd generator(const Eigen::VectorXd& s, const Eigen::VectorXd& drift,
                            const Eigen::MatrixXd& diffusion) const;

  std::vector<std::string> names() const;

 private:
  void check_point(const Eigen::VectorXd& s, const Eigen::VectorXd& a) const;
  double action_factor(const BasisFunction& f, const Eigen::VectorXd& a) const;

  int state_dim_;
  int action_dim_;
  std::vector<BasisFunction> fns_;
  bool positive_domain_ = false;
};

/// {1?} then {s_i s_j : i <= j}, squares first, then cross terms in
/// lexicographic order: d=2 gives {1, s1^2, s2^2, s1 s2}.
BasisSet quadratic_state_basis(int d, bool include_constant);

/// {1?}, {a_k a_l}, {s_i a_k}, {s_i s_j}: d=m=1 gives {a^2, s a, s^2}.
BasisSet quadratic_state_action_basis(int d, int m, bool include_constant);

/// {s^p} with p = 1 - gamma (p = 0.5 for gamma = 0.5).
BasisSet merton_value_basis(double power = 0.5);

/// {s^p, s^p a, s^p a^2}.
BasisSet merton_q_basis(double power = 0.5);

}  // namespace phibe
