#include "ctsmc/expm.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include "ctsmc/common.hpp"

namespace ctsmc {

Eigen::MatrixXd generator_from_rates(const Eigen::MatrixXd& rates) {
  Eigen::MatrixXd q = rates;
  for (int r = 0; r < q.rows(); ++r) {
    q(r, r) = 0.0;
    q(r, r) = -q.row(r).sum();
  }
  return q;
}

Eigen::MatrixXd small_expm(const Eigen::MatrixXd& q, double t) {
  if (q.rows() != q.cols()) throw ValidationError("rate matrix must be square");
  if (!(t >= 0.0)) throw ValidationError("time must be nonnegative");
  double scale = q.cwiseAbs().maxCoeff();
  double tol = 1e-9 * std::max(1.0, scale);
  for (int r = 0; r < q.rows(); ++r) {
    for (int c = 0; c < q.cols(); ++c)
      if (r != c && q(r, c) < 0.0) throw ValidationError("generator off-diagonals must be nonnegative");
    if (std::abs(q.row(r).sum()) > tol)
      throw ValidationError("generator rows must sum to zero");
  }
  Eigen::MatrixXd a = t * q;
  return a.exp();
}

Eigen::MatrixXd dense_expm(const Eigen::MatrixXd& a) { return a.exp(); }

}  // namespace ctsmc
