#ifndef CTSMC_ORACLE_HPP
#define CTSMC_ORACLE_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "ctsmc/model.hpp"

namespace ctsmc {

// Default cap on the enumerated state space (4^10 states).
inline constexpr int64_t kDefaultStateCap = 1048576;

// Mixed-radix site-major encoding of sequences: site i (0-based) is digit i
// with weight a^i, so index = sum_i sym[i] * a^i.
struct StateSpace {
  int n = 0;
  int a = 0;
  int64_t size = 0;

  StateSpace(int n_, int a_, int64_t cap);

  int64_t encode(const uint8_t* sym) const {
    int64_t idx = 0;
    for (int i = n - 1; i >= 0; --i) idx = idx * a + sym[i];
    return idx;
  }
  void decode(int64_t idx, uint8_t* sym) const {
    for (int i = 0; i < n; ++i) {
      sym[i] = static_cast<uint8_t>(idx % a);
      idx /= a;
    }
  }
};

struct MarginalResult {
  double p = 0.0;
  int truncation_order = 0;
  double lambda = 0.0;
};

struct DistributionResult {
  std::vector<double> p;  // end-state distribution given the start state
  int truncation_order = 0;
  double lambda = 0.0;
};

// (e^{T Q~_beta})_{x,y} by uniformization over the full state space.
// Absolute error <= tol. Throws CapExceeded when a^n exceeds the cap.
MarginalResult exact_marginal(const ContextModel& model, const Sequence& x, const Sequence& y,
                              double t, double beta, double tol,
                              int64_t cap = kDefaultStateCap, unsigned threads = 1);

// The whole row of e^{T Q~_beta}; used for probability-conservation checks.
DistributionResult exact_distribution(const ContextModel& model, const Sequence& x, double t,
                                      double beta, double tol, int64_t cap = kDefaultStateCap,
                                      unsigned threads = 1);

// Law of the virtual jump count M of the uniformized chain conditioned on the
// endpoints, P(M = m | x_i, y_i), with Lambda equal to the max exit rate of q.
// Truncated at relative tail mass <= tol.
std::vector<double> conditional_jump_dist(const Eigen::MatrixXd& q, double t, int xi, int yi,
                                          double tol);

struct ChiSquareResult {
  double l2 = 0.0;       // E[w^2] / E[w]^2 between the two tempered targets
  double z_prev = 0.0;   // marginal at beta_prev
  double z_next = 0.0;   // marginal at beta_next
  double tilted = 0.0;   // (e^{T M})_{x,y} for the tilted operator
};

// Exact chi-square divergence L2(pi_next, pi_prev) via the tilted operator
// with jump rates gamma * phi^{2 b_next - b_prev} and diagonal
// -(2 exit_next - exit_prev).
ChiSquareResult exact_chi_square(const ContextModel& model, const Sequence& x, const Sequence& y,
                                 double t, double beta_prev, double beta_next, double tol,
                                 int64_t cap = kDefaultStateCap, unsigned threads = 1);

// The tilted-operator entry (e^{T M})_{x,y} alone, so callers evaluating a
// whole ladder can reuse the per-temperature marginals.
double tilted_entry(const ContextModel& model, const Sequence& x, const Sequence& y, double t,
                    double beta_prev, double beta_next, double tol,
                    int64_t cap = kDefaultStateCap, unsigned threads = 1);

// Dense generator over the full state space (test-scale cross-check route).
Eigen::MatrixXd dense_generator(const ContextModel& model, int n, double beta);

}  // namespace ctsmc

#endif
