#include <doctest.h>

#include "ctsmc/bench.hpp"
#include "ctsmc/oracle.hpp"
#include "ctsmc/smc.hpp"
#include "test_support.hpp"

using namespace ctsmc;
using test::seq;

TEST_CASE("zeta closed form") {
  CHECK(zeta(24, 6, 0.25) == doctest::Approx(8.625).epsilon(1e-15));
  CHECK(zeta(10, 0, 0.5) == doctest::Approx(10 * 0.25).epsilon(1e-15));
  CHECK(zeta(7, 3, 0.0) == doctest::Approx(3.0));
  CHECK_THROWS_AS(zeta(3, 4, 0.1), ValidationError);
}

TEST_CASE("build_ladder collapses for independent sites") {
  ContextModel m = test::symmetric_model();
  Sequence x = seq(m, "ACGT"), y = seq(m, "ATGT");
  TemperatureLadder lad = build_ladder(m, x, y, 0.25, 1.0);
  CHECK(lad.betas == std::vector<double>{0.0, 1.0});
  CHECK(lad.rule == "trivial");
}

TEST_CASE("build_ladder on the n=10 island fixture: V=7 by the practical rule") {
  ContextModel m = test::cpg(2.0);
  IslandInstance inst = island_instance(2, m.alphabet);
  REQUIRE(inst.n == 10);
  REQUIRE(inst.r == 4);
  TemperatureLadder lad = build_ladder(m, inst.x, inst.y, inst.t, 1.0);
  // zeta = 4 + 4*0.4 + 6*0.16 = 6.56, 1/zeta < 1/log(1+16), so V = ceil(6.56) = 7
  CHECK(lad.zeta_value == doctest::Approx(6.56).epsilon(1e-12));
  CHECK(lad.V() == 7);
  CHECK(lad.rule == "practical");
  CHECK(lad.betas.front() == 0.0);
  CHECK(lad.betas.back() == 1.0);
  for (size_t v = 1; v < lad.betas.size(); ++v)
    CHECK(lad.betas[v] - lad.betas[v - 1] <= lad.delta_beta_cap + 1e-15);
}

TEST_CASE("closed-form cap is evaluated in log space and matches a direct recompute") {
  ContextModel m = test::cpg(2.0);
  Sequence x = seq(m, "ACGT"), y = seq(m, "ATGT");
  double t = 0.25;
  TemperatureLadder lad = build_ladder(m, x, y, t, 1.0);
  // straight-line recomputation of the closed-form cap
  double q = 3.0, k1 = 3.0;  // q and (k+1)
  double gt_max = m.gamma_max * m.phi_max, gt_min = m.gamma_min * m.phi_min;
  double delta_tilde = q * k1 * (gt_max - gt_min);
  double c0 = std::exp(1.0) * gt_max * std::exp(t * delta_tilde);
  double log_l1 = log_sum_exp(std::log(q * q) + t * q, std::log(c0 * q * q) + c0 * t * q);
  double log_l3 = log_sum_exp(std::log(q * q) + t * q, std::log(c0 * c0 * q * q) + c0 * t * q);
  double l2 = std::log(std::exp(1.0) * std::exp(2 * t * delta_tilde) * gt_max / gt_min);
  double log_lambda = std::max({log_l1, std::log(l2), log_l3});
  double zeta_v = zeta(4, 1, t);
  double phi_term = std::log(std::max(1.0, m.phi_max * m.phi_max) / std::min(1.0, m.phi_min));
  double growth = 1.0 + t * m.gamma_max * std::max(1.0, m.phi_max) * q * k1;
  double log_cap = -(std::log(zeta_v) + std::log(8.0) + log_lambda + std::log(phi_term) + std::log(growth));
  CHECK(lad.log10_closed_form_cap == doctest::Approx(log_cap / std::log(10.0)).epsilon(1e-9));
  CHECK(lad.rule == "practical");  // the closed-form cap is far below 1/max_stages
  // the log1p(phi_max) step hypothesis is enforced
  CHECK(lad.delta_beta_cap <= 1.0 / std::log1p(m.phi_max) + 1e-15);
}

TEST_CASE("halving safety doubles the stage count up to rounding") {
  ContextModel m = test::cpg(2.0);
  IslandInstance inst = island_instance(2, m.alphabet);
  TemperatureLadder full = build_ladder(m, inst.x, inst.y, inst.t, 1.0);
  TemperatureLadder half = build_ladder(m, inst.x, inst.y, inst.t, 0.5);
  CHECK(std::abs(half.V() - 2 * full.V()) <= 1);
  CHECK_THROWS_AS(build_ladder(m, inst.x, inst.y, inst.t, 0.0), ValidationError);
  CHECK_THROWS_AS(build_ladder(m, inst.x, inst.y, inst.t, 1.5), ValidationError);
}

TEST_CASE("log_weight identities") {
  ContextModel m = test::cpg(2.0);
  Sequence x = seq(m, "ACGT"), y = seq(m, "ATGT");
  BridgeSet bridges(m, x.size(), 0.25);
  Rng rng(3);
  Rng draw = rng.stream(0);
  Path p = bridges.sample_path(x, y, draw);
  TemperedModelView a(m, 0.4), b(m, 0.4), c(m, 0.9);
  CHECK(log_weight(a, b, x, y, p) == 0.0);
  CHECK(log_weight(a, c, x, y, p) ==
        doctest::Approx(log_density_dsm(c, x, y, p) - log_density_dsm(a, x, y, p)).epsilon(1e-15));
  ContextModel ism = test::symmetric_model();
  TemperedModelView i0(ism, 0.0), i1(ism, 1.0);
  CHECK(log_weight(i0, i1, x, y, p) == 0.0);
}

TEST_CASE("multinomial resampling: moments and degenerate cases") {
  Rng rng(9);
  const size_t n = 64;
  std::vector<double> logw(n, 0.0);
  // single surviving weight
  for (size_t i = 0; i < n; ++i) logw[i] = i == 17 ? 0.0 : kNegInf;
  auto idx = resample_multinomial(logw, rng);
  for (int a : idx) CHECK(a == 17);

  // equal weights: counts look binomial
  std::fill(logw.begin(), logw.end(), -1.25);
  std::vector<int64_t> counts(n, 0);
  const int reps = 2000;
  for (int r = 0; r < reps; ++r) {
    Rng local = rng.stream(static_cast<uint64_t>(r));
    for (int a : resample_multinomial(logw, local)) ++counts[static_cast<size_t>(a)];
  }
  double expect = static_cast<double>(reps);  // N draws over n=N slots, reps times
  double se = std::sqrt(expect * (1.0 - 1.0 / n));
  for (size_t i = 0; i < n; ++i) CHECK(std::abs(counts[i] - expect) <= 5 * se);

  std::fill(logw.begin(), logw.end(), kNegInf);
  CHECK_THROWS_AS(resample_multinomial(logw, rng), NumericAbort);
}

TEST_CASE("resampling hits expected counts for skewed weights") {
  Rng rng(31);
  std::vector<double> logw = {std::log(0.5), std::log(0.25), std::log(0.125), std::log(0.125)};
  const int reps = 10000;
  std::vector<int64_t> counts(4, 0);
  for (int r = 0; r < reps; ++r) {
    Rng local = rng.stream(static_cast<uint64_t>(r));
    for (int a : resample_multinomial(logw, local)) ++counts[static_cast<size_t>(a)];
  }
  double total_draws = 4.0 * reps;
  std::vector<double> probs = {0.5, 0.25, 0.125, 0.125};
  for (size_t i = 0; i < 4; ++i) {
    double expect = total_draws * probs[i];
    double se = std::sqrt(total_draws * probs[i] * (1 - probs[i]));
    CHECK(std::abs(counts[i] - expect) <= 4 * se);
  }
}

TEST_CASE("systematic resampling keeps equal weights intact") {
  Rng rng(77);
  std::vector<double> logw(32, -0.5);
  auto idx = resample_systematic(logw, rng);
  std::vector<int> counts(32, 0);
  for (int a : idx) ++counts[static_cast<size_t>(a)];
  for (int c : counts) CHECK(c == 1);

  // heavily skewed: the heavy index dominates
  std::fill(logw.begin(), logw.end(), std::log(1e-9));
  logw[5] = 0.0;
  auto skew = resample_systematic(logw, rng);
  int heavy = 0;
  for (int a : skew) heavy += a == 5 ? 1 : 0;
  CHECK(heavy == 32);
}

TEST_CASE("ess identities") {
  std::vector<double> equal(128, -2.0);
  CHECK(ess(equal) == doctest::Approx(128.0).epsilon(1e-12));
  std::vector<double> one = {kNegInf, 0.3, kNegInf};
  CHECK(ess(one) == doctest::Approx(1.0).epsilon(1e-12));
  std::vector<double> shifted = {0.1, -0.7, 0.3};
  std::vector<double> rescaled = {5.1, 4.3, 5.3};
  CHECK(ess(shifted) == doctest::Approx(ess(rescaled)).epsilon(1e-12));
}

TEST_CASE("run_is on independent sites returns z0 exactly") {
  ContextModel m = test::symmetric_model();
  Sequence x = seq(m, "ACGT"), y = seq(m, "ATGT");
  SmcOptions opts;
  opts.n_particles = 64;
  EstimateReport rep = run_is(m, x, y, 0.25, 5, opts);
  CHECK(rep.log_z_hat == rep.log_z0);
  CHECK(rep.stage_chi2.front() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rep.stage_ess.front() == doctest::Approx(64.0).epsilon(1e-9));
}

TEST_CASE("run_smc on independent sites returns z0 exactly for any ladder") {
  ContextModel m = test::symmetric_model();
  Sequence x = seq(m, "ACGT"), y = seq(m, "ATGT");
  TemperatureLadder lad;
  lad.betas = {0.0, 0.3, 1.0};
  SmcOptions opts;
  opts.n_particles = 32;
  EstimateReport rep = run_smc(m, x, y, 0.25, lad, 7, opts);
  CHECK(rep.log_z_hat == rep.log_z0);
  for (double a : rep.stage_accept_rate) CHECK(a == doctest::Approx(1.0));
}

TEST_CASE("degenerate ladder run_smc equals run_is bitwise") {
  ContextModel m = test::cpg(2.0);
  Sequence x = seq(m, "ACGT"), y = seq(m, "ATGT");
  TemperatureLadder lad;
  lad.betas = {0.0, 1.0};
  SmcOptions opts;
  opts.n_particles = 256;
  EstimateReport smc = run_smc(m, x, y, 0.25, lad, 99, opts);
  EstimateReport is = run_is(m, x, y, 0.25, 99, opts);
  CHECK(smc.log_z_hat == is.log_z_hat);
  CHECK(smc.stage_log_mean_weight.front() == is.stage_log_mean_weight.front());
  CHECK(smc.stage_ess.front() == is.stage_ess.front());
}

TEST_CASE("seed determinism and thread independence") {
  ContextModel m = test::cpg(2.0);
  Sequence x = seq(m, "ACGT"), y = seq(m, "ATGT");
  TemperatureLadder lad = build_ladder(m, x, y, 0.25, 1.0);
  SmcOptions opts;
  opts.n_particles = 128;
  EstimateReport a = run_smc(m, x, y, 0.25, lad, 1234, opts);
  EstimateReport b = run_smc(m, x, y, 0.25, lad, 1234, opts);
  opts.threads = 2;
  EstimateReport c = run_smc(m, x, y, 0.25, lad, 1234, opts);
  CHECK(a.log_z_hat == b.log_z_hat);
  CHECK(a.log_z_hat == c.log_z_hat);
  CHECK(a.stage_log_mean_weight == c.stage_log_mean_weight);
  CHECK(a.stage_ess == c.stage_ess);
  CHECK(a.stage_accept_rate == c.stage_accept_rate);
  EstimateReport d = run_smc(m, x, y, 0.25, lad, 1235, opts);
  CHECK(a.log_z_hat != d.log_z_hat);
}

TEST_CASE("smc estimate is consistent with the oracle on the n=4 fixture") {
  ContextModel m = test::cpg(2.0);
  Sequence x = seq(m, "ACGT"), y = seq(m, "ATGT");
  double p_exact = exact_marginal(m, x, y, 0.25, 1.0, 1e-12).p;
  TemperatureLadder lad = build_ladder(m, x, y, 0.25, 1.0);
  SmcOptions opts;
  opts.n_particles = 2048;
  opts.threads = 2;
  int hits = 0;
  for (uint64_t s = 0; s < 5; ++s) {
    EstimateReport rep = run_smc(m, x, y, 0.25, lad, 500 + s, opts);
    if (std::abs(std::exp(rep.log_z_hat) / p_exact - 1.0) <= 0.05) ++hits;
  }
  CHECK(hits >= 4);
}

TEST_CASE("product estimator is unbiased over replicate seeds") {
  ContextModel m = test::cpg(2.0);
  Sequence x = seq(m, "ACGT"), y = seq(m, "ATGT");
  double p_exact = exact_marginal(m, x, y, 0.25, 1.0, 1e-12).p;
  TemperatureLadder lad = build_ladder(m, x, y, 0.25, 1.0);
  SmcOptions opts;
  opts.n_particles = 512;
  opts.threads = 2;
  const int reps = 200;
  double sum = 0.0, sum2 = 0.0;
  for (int r = 0; r < reps; ++r) {
    EstimateReport rep = run_smc(m, x, y, 0.25, lad, 9000 + static_cast<uint64_t>(r), opts);
    double z = std::exp(rep.log_z_hat);
    sum += z;
    sum2 += z * z;
  }
  double mean = sum / reps;
  double se = std::sqrt((sum2 / reps - mean * mean) / (reps - 1));
  CHECK(std::abs(mean - p_exact) <= 3.0 * se);
}

TEST_CASE("island instances expand the expected motifs") {
  ContextModel m = test::cpg(2.0);
  IslandInstance one = island_instance(1, m.alphabet);
  CHECK(format_sequence(one.x, m.alphabet) == "TTCATT");
  CHECK(format_sequence(one.y, m.alphabet) == "TTTGTT");
  CHECK(one.r == 2);
  IslandInstance two = island_instance(2, m.alphabet);
  CHECK(format_sequence(two.x, m.alphabet) == "TTCATTCATT");
  CHECK(format_sequence(two.y, m.alphabet) == "TTTGTTTGTT");
  CHECK(two.n == 10);
  CHECK(two.r == 4);
  CHECK(two.t == doctest::Approx(0.4));
}

TEST_CASE("adaptive ladder reaches 1 and matches the oracle") {
  ContextModel m = test::cpg(2.0);
  Sequence x = seq(m, "ACGT"), y = seq(m, "ATGT");
  double p_exact = exact_marginal(m, x, y, 0.25, 1.0, 1e-12).p;
  TemperatureLadder lad = build_ladder(m, x, y, 0.25, 1.0);
  SmcOptions opts;
  opts.n_particles = 1024;
  opts.adaptive_ladder = true;
  EstimateReport rep = run_smc(m, x, y, 0.25, lad, 31, opts);
  REQUIRE(rep.betas.size() >= 2);
  CHECK(rep.betas.front() == 0.0);
  CHECK(rep.betas.back() == 1.0);
  for (size_t v = 1; v < rep.betas.size(); ++v) CHECK(rep.betas[v] > rep.betas[v - 1]);
  CHECK(std::abs(std::exp(rep.log_z_hat) / p_exact - 1.0) < 0.15);
  // deterministic too
  EstimateReport rep2 = run_smc(m, x, y, 0.25, lad, 31, opts);
  CHECK(rep.log_z_hat == rep2.log_z_hat);
  CHECK(rep.betas == rep2.betas);
}

TEST_CASE("run_smc validates its inputs") {
  ContextModel m = test::cpg(2.0);
  Sequence x = seq(m, "ACGT"), y = seq(m, "ATGT");
  TemperatureLadder bad;
  bad.betas = {0.0, 0.5, 0.5, 1.0};
  SmcOptions opts;
  opts.n_particles = 16;
  CHECK_THROWS_AS(run_smc(m, x, y, 0.25, bad, 1, opts), ValidationError);
  TemperatureLadder ok;
  ok.betas = {0.0, 1.0};
  opts.n_particles = 1;
  CHECK_THROWS_AS(run_smc(m, x, y, 0.25, ok, 1, opts), ValidationError);
}
