#ifndef CTSMC_BOUNDS_HPP
#define CTSMC_BOUNDS_HPP

#include <optional>
#include <vector>

#include "ctsmc/model.hpp"
#include "ctsmc/partition.hpp"
#include "ctsmc/path.hpp"

namespace ctsmc {

// zeta_A = r_A + r_A T + (n_A - r_A) T^2, the jump-count control quantity.
double zeta(int n, int r, double t);
double zeta_of_sites(const Sequence& x, const Sequence& y, const std::vector<int>& sites, double t);

// Rate-spread constants: delta = q (gamma_max - gamma_min) for the base rates,
// delta~ = q (k+1) (gamma~_max - gamma~_min) for the full-strength rates.
struct RateSpread {
  double gamma_t_max = 0.0;  // gamma_max * phi_max
  double gamma_t_min = 0.0;  // gamma_min * phi_min
  double delta = 0.0;
  double delta_tilde = 0.0;
};
RateSpread rate_spread(const ContextModel& model);

// The three-part jump-count MGF constant, evaluated at the full-strength
// (beta = 1) rate extrema. Natural values overflow to inf for strong
// dependence; the log forms stay finite.
struct LambdaTheta {
  double lambda1 = 0.0, lambda2 = 0.0, lambda3 = 0.0, lambda = 0.0;
  double log_lambda1 = 0.0, log_lambda3 = 0.0, log_lambda = 0.0;
};
LambdaTheta lambda_theta(const ContextModel& model, double theta, double t);

struct MixingTimeBound {
  double log_value = 0.0;  // natural log of the bound for the lazy chain
  double value = 0.0;      // inf when it overflows
  double c1 = 0.0, c2 = 0.0, c3 = 0.0;
};
MixingTimeBound mixing_time_bound(const ContextModel& model, const IslandPartition& partition,
                                  const Sequence& x, const Sequence& y, double t, double epsilon,
                                  double omega);

struct MgfCheck {
  double log_empirical = 0.0;
  double log_bound = 0.0;
  bool pass = false;
  double log10_margin = 0.0;  // log10(bound / empirical)
  int edge_sites = 0;
  double zeta_a = 0.0;
};

// Empirical E[theta^{m(P_A)}] (self-normalized when log-weights are given)
// against the closed-form bound with the edge-site prefactor.
MgfCheck check_mgf_bound(const std::vector<Path>& samples, const std::vector<double>* log_weights,
                         const ContextModel& model, const Sequence& x, const Sequence& y,
                         const std::vector<int>& siteset, double theta, double t);

struct StageL2 {
  double value = 0.0;
  bool exact = false;
};

struct LadderL2Report {
  std::vector<StageL2> stages;
  bool all_within_bound = false;  // every stage <= 2 e^3
};

// Per-stage chi-square of a tempering ladder: the exact tilted-operator oracle
// when a^n fits the cap, otherwise the supplied empirical estimates.
LadderL2Report check_l2_ladder(const ContextModel& model, const Sequence& x, const Sequence& y,
                               double t, const std::vector<double>& betas, double tol, int64_t cap,
                               unsigned threads,
                               const std::vector<double>* empirical_fallback = nullptr);

// L2 bound that every ladder stage must satisfy under the step-size rule.
inline constexpr double kStageL2Bound = 40.171073846375336;  // 2 e^3

}  // namespace ctsmc

#endif
