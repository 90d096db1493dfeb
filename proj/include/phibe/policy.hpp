#pragma once

#include <Eigen/Dense>

namespace phibe {

/// Affine feedback a = K s + offset. LQR policies carry a zero offset; the
/// constant Merton allocation is K = 0 with offset = a*.
struct LinearPolicy {
  Eigen::MatrixXd K;
  Eigen::VectorXd offset;

  LinearPolicy() = default;
  explicit LinearPolicy(Eigen::MatrixXd gain)
      : K(std::move(gain)), offset(Eigen::VectorXd::Zero(K.rows())) {}
  LinearPolicy(Eigen::MatrixXd gain, Eigen::VectorXd off)
      : K(std::move(gain)), offset(std::move(off)) {}

  static LinearPolicy constant(int state_dim, double a) {
    return LinearPolicy(Eigen::MatrixXd::Zero(1, state_dim),
                        Eigen::VectorXd::Constant(1, a));
  }

  int action_dim() const { return static_cast<int>(K.rows()); }
  int state_dim() const { return static_cast<int>(K.cols()); }

  Eigen::VectorXd operator()(const Eigen::VectorXd& s) const {
    return K * s + offset;
  }
};

}  // namespace phibe
