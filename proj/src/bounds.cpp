#include "ctsmc/bounds.hpp"

#include <algorithm>
#include <cmath>

#include "ctsmc/oracle.hpp"

namespace ctsmc {

double zeta(int n, int r, double t) {
  if (r > n || r < 0 || n < 0) throw ValidationError("zeta requires 0 <= r <= n");
  if (!(t >= 0.0)) throw ValidationError("zeta requires T >= 0");
  return r + r * t + (n - r) * t * t;
}

double zeta_of_sites(const Sequence& x, const Sequence& y, const std::vector<int>& sites, double t) {
  int r = 0;
  for (int i : sites)
    if (x[i] != y[i]) ++r;
  return zeta(static_cast<int>(sites.size()), r, t);
}

RateSpread rate_spread(const ContextModel& model) {
  RateSpread s;
  s.gamma_t_max = model.gamma_max * model.phi_max;
  s.gamma_t_min = model.gamma_min * model.phi_min;
  double q = model.q();
  s.delta = q * (model.gamma_max - model.gamma_min);
  s.delta_tilde = q * (model.k + 1) * (s.gamma_t_max - s.gamma_t_min);
  return s;
}

LambdaTheta lambda_theta(const ContextModel& model, double theta, double t) {
  if (!(theta > 0.0)) throw ValidationError("theta must be positive");
  RateSpread s = rate_spread(model);
  double q = model.q();
  double log_q2 = 2.0 * std::log(q);
  double log_c0 = std::log(theta) + std::log(s.gamma_t_max) + t * s.delta_tilde;
  // The exponent T q c0 is used as a value; it overflows to inf for strong
  // dependence, which propagates to an infinite lambda.
  double c0_tq = t * q == 0.0 ? 0.0 : t * q * std::exp(log_c0);

  LambdaTheta out;
  out.log_lambda1 = log_sum_exp(log_q2 + t * q, log_c0 + log_q2 + c0_tq);
  out.log_lambda3 = log_sum_exp(log_q2 + t * q, 2.0 * log_c0 + log_q2 + c0_tq);
  out.lambda2 = std::log(theta) + 2.0 * t * s.delta_tilde + std::log(s.gamma_t_max / s.gamma_t_min);
  double log_l2 = out.lambda2 > 0.0 ? std::log(out.lambda2) : kNegInf;
  out.log_lambda = std::max({out.log_lambda1, log_l2, out.log_lambda3});
  out.lambda1 = std::exp(out.log_lambda1);
  out.lambda3 = std::exp(out.log_lambda3);
  out.lambda = std::exp(out.log_lambda);
  return out;
}

MixingTimeBound mixing_time_bound(const ContextModel& model, const IslandPartition& partition,
                                  const Sequence& x, const Sequence& y, double t, double epsilon,
                                  double omega) {
  if (!(epsilon > 0.0) || !(epsilon < 1.0)) throw ValidationError("epsilon must be in (0,1)");
  if (!(omega > 1.0)) throw ValidationError("omega must exceed 1");
  RateSpread s = rate_spread(model);
  LambdaTheta lam = lambda_theta(model, std::exp(1.0), t);

  MixingTimeBound out;
  double log_phi_star = std::log(model.phi_star());
  out.c1 = 2.0 * lam.lambda * log_phi_star;
  out.c2 = 4.0 * lam.lambda * (s.delta_tilde + s.delta);
  // c1 and c2 are both proportional to lambda(e), so c3 stays finite.
  out.c3 = 3.0 * (2.0 * log_phi_star + 8.0 * t * (s.delta_tilde + s.delta));

  double b = partition.B();
  double max_zeta_block = 0.0, max_zeta_div = 0.0, max_zeta_bnd = 0.0;
  for (int j = 0; j < partition.B(); ++j) {
    max_zeta_block = std::max(max_zeta_block, zeta_of_sites(x, y, partition.block_sites(j), t));
    max_zeta_div = std::max(max_zeta_div, zeta_of_sites(x, y, partition.division[static_cast<size_t>(j)], t));
    max_zeta_bnd = std::max(max_zeta_bnd, zeta_of_sites(x, y, partition.boundary[static_cast<size_t>(j)], t));
  }
  double zeta_div_all = zeta_of_sites(x, y, partition.all_division(), t);
  double zeta_bnd_all = zeta_of_sites(x, y, partition.all_boundary(), t);

  double exp1 = 2.0 * max_zeta_block + max_zeta_div + zeta_div_all;
  double exp2 = zeta_div_all + zeta_bnd_all + max_zeta_div + max_zeta_bnd + 2.0 * max_zeta_block;

  out.log_value = std::log(b) + std::log(std::log(80.0 * std::pow(omega, 4) / (epsilon * epsilon))) +
                  out.c3 * std::log(60.0 * b * omega * omega / (epsilon * epsilon)) +
                  out.c1 * exp1 + out.c2 * t * exp2;
  out.value = std::exp(out.log_value);
  return out;
}

MgfCheck check_mgf_bound(const std::vector<Path>& samples, const std::vector<double>* log_weights,
                         const ContextModel& model, const Sequence& x, const Sequence& y,
                         const std::vector<int>& siteset, double theta, double t) {
  if (samples.empty()) throw ValidationError("empty sample set");
  if (log_weights && log_weights->size() != samples.size())
    throw ValidationError("weights and samples differ in length");
  double log_theta = std::log(theta);
  std::vector<double> terms(samples.size()), weights(samples.size(), 0.0);
  for (size_t i = 0; i < samples.size(); ++i) {
    double lw = log_weights ? (*log_weights)[i] : 0.0;
    weights[i] = lw;
    terms[i] = lw + jump_counts(samples[i], siteset) * log_theta;
  }

  MgfCheck out;
  out.log_empirical = log_sum_exp(terms) - log_sum_exp(weights);

  int n = x.size();
  std::vector<char> in_set(static_cast<size_t>(n), 0);
  for (int i : siteset) in_set[static_cast<size_t>(i)] = 1;
  for (int i : siteset)
    for (int c : model.context_sites(i, n))
      if (!in_set[static_cast<size_t>(c)]) {
        ++out.edge_sites;
        break;
      }

  RateSpread s = rate_spread(model);
  LambdaTheta lam = lambda_theta(model, theta, t);
  out.zeta_a = zeta_of_sites(x, y, siteset, t);
  out.log_bound = t * model.q() * out.edge_sites * (s.gamma_t_max - s.gamma_t_min) +
                  lam.lambda * out.zeta_a;
  if (lam.lambda == kInf && out.zeta_a == 0.0)
    out.log_bound = t * model.q() * out.edge_sites * (s.gamma_t_max - s.gamma_t_min);
  out.pass = out.log_empirical <= out.log_bound;
  out.log10_margin = (out.log_bound - out.log_empirical) / std::log(10.0);
  return out;
}

LadderL2Report check_l2_ladder(const ContextModel& model, const Sequence& x, const Sequence& y,
                               double t, const std::vector<double>& betas, double tol, int64_t cap,
                               unsigned threads, const std::vector<double>* empirical_fallback) {
  if (betas.size() < 2) throw ValidationError("ladder needs at least two temperatures");
  LadderL2Report report;
  report.all_within_bound = true;
  bool in_cap = true;
  try {
    StateSpace probe(x.size(), model.a(), cap);
  } catch (const CapExceeded&) {
    in_cap = false;
  }
  // marginals are shared between consecutive stages
  std::vector<double> z;
  if (in_cap)
    for (double b : betas) z.push_back(exact_marginal(model, x, y, t, b, tol, cap, threads).p);
  for (size_t v = 1; v < betas.size(); ++v) {
    StageL2 stage;
    if (in_cap) {
      if (!(z[v - 1] > 0.0) || !(z[v] > 0.0))
        throw NumericAbort("zero transition probability in chi-square oracle");
      double tilted = tilted_entry(model, x, y, t, betas[v - 1], betas[v], tol, cap, threads);
      stage.value = tilted * z[v - 1] / (z[v] * z[v]);
      stage.exact = true;
    } else if (empirical_fallback && v - 1 < empirical_fallback->size()) {
      stage.value = (*empirical_fallback)[v - 1];
      stage.exact = false;
    } else {
      throw CapExceeded("state space over the cap and no empirical chi-square estimates supplied");
    }
    report.all_within_bound = report.all_within_bound && stage.value <= kStageL2Bound;
    report.stages.push_back(stage);
  }
  return report;
}

}  // namespace ctsmc
