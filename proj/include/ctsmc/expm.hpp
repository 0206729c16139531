#ifndef CTSMC_EXPM_HPP
#define CTSMC_EXPM_HPP

#include <Eigen/Dense>

namespace ctsmc {

// e^{T Q} for a small generator (row sums zero, off-diagonals nonnegative).
// Throws ValidationError on non-generator input. Rows of the result sum to 1
// to ~1e-14.
Eigen::MatrixXd small_expm(const Eigen::MatrixXd& q, double t);

// General dense matrix exponential (scaling and squaring); no generator
// checks. Used as the independent cross-check route for the sparse oracle.
Eigen::MatrixXd dense_expm(const Eigen::MatrixXd& a);

// Embed an off-diagonal rate matrix as a proper generator.
Eigen::MatrixXd generator_from_rates(const Eigen::MatrixXd& rates);

}  // namespace ctsmc

#endif
