#pragma once

#include <Eigen/Dense>
#include <limits>
#include <string>

#include "phibe/error.hpp"

namespace phibe::detail {

struct SolveResult {
  Eigen::VectorXd x;
  double condition = 0.0;
};

// Row/column max-norm equilibration, then column-pivoted QR. Features such as
// s^2 and a^2 can differ by many orders of magnitude; the scaling removes that
// from the condition estimate |R_00| / |R_nn|.
inline SolveResult pivoted_solve(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                                 const std::string& what) {
  if (!a.allFinite() || !b.allFinite()) {
    fail_numerical(what + ": non-finite system");
  }
  auto inv_or_one = [](double v) { return v > 0.0 ? 1.0 / v : 1.0; };
  const Eigen::VectorXd row = a.cwiseAbs().rowwise().maxCoeff().unaryExpr(inv_or_one);
  const Eigen::MatrixXd ar = row.asDiagonal() * a;
  const Eigen::VectorXd col = ar.cwiseAbs().colwise().maxCoeff().transpose().unaryExpr(inv_or_one);
  const Eigen::MatrixXd scaled = ar * col.asDiagonal();

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(scaled);
  const Eigen::Index n = a.cols();
  const Eigen::VectorXd diag = qr.matrixR().diagonal().cwiseAbs();
  const double big = diag.size() > 0 ? diag(0) : 0.0;
  const double small = diag.size() > 0 ? diag(diag.size() - 1) : 0.0;
  const double cond = small > 0.0 ? big / small : std::numeric_limits<double>::infinity();
  if (!(big > 0.0) || qr.rank() < n || !(cond < 1e13)) {
    fail_numerical(what + " (condition estimate " + std::to_string(cond) + ")");
  }
  SolveResult out{col.asDiagonal() * qr.solve(row.asDiagonal() * b), cond};
  if (!out.x.allFinite()) fail_numerical(what + ": non-finite solution");
  return out;
}

}  // namespace phibe::detail
