#include <doctest.h>

#include "ctsmc/mcmc.hpp"
#include "ctsmc/oracle.hpp"
#include "test_support.hpp"

using namespace ctsmc;
using test::seq;

namespace {

struct ChainSetup {
  ContextModel model;
  Sequence x, y;
  double t;
  IslandPartition partition;
};

ChainSetup cpg4_setup(double lambda = 2.0) {
  ChainSetup s{test::cpg(lambda), {}, {}, 0.25, {}};
  s.x = seq(s.model, "ACGT");
  s.y = seq(s.model, "ATGT");
  s.partition = single_block_partition(s.model, s.x, s.y);
  return s;
}

double two_sample_chisq_pvalue(const std::vector<int64_t>& a, const std::vector<int64_t>& b) {
  size_t bins = std::max(a.size(), b.size());
  double na = 0, nb = 0;
  for (auto v : a) na += static_cast<double>(v);
  for (auto v : b) nb += static_cast<double>(v);
  double k1 = std::sqrt(nb / na), k2 = std::sqrt(na / nb);
  double stat = 0.0;
  int dof = -1;
  double acc_a = 0, acc_b = 0;
  for (size_t i = 0; i < bins; ++i) {
    acc_a += i < a.size() ? static_cast<double>(a[i]) : 0.0;
    acc_b += i < b.size() ? static_cast<double>(b[i]) : 0.0;
    if (acc_a + acc_b >= 10.0) {
      double d = k1 * acc_a - k2 * acc_b;
      stat += d * d / (acc_a + acc_b);
      ++dof;
      acc_a = acc_b = 0;
    }
  }
  if (acc_a + acc_b > 0) {
    double d = k1 * acc_a - k2 * acc_b;
    stat += d * d / (acc_a + acc_b);
    ++dof;
  }
  if (dof < 1) return 1.0;
  return test::chi2_tail(stat, dof);
}

}  // namespace

TEST_CASE("independent-site target accepts every proposal") {
  ContextModel m = test::symmetric_model();
  Sequence x = seq(m, "ACGT"), y = seq(m, "ATGT");
  IslandPartition part = single_block_partition(m, x, y);
  TemperedModelView view(m, 1.0);
  BridgeSet bridges(m, x.size(), 0.25);
  Rng rng(7);
  Rng init_rng = rng.stream(0);
  ChainState state = make_chain_state(view, x, y, bridges.sample_path(x, y, init_rng), part);
  Rng step_rng = rng.stream(1);
  for (int s = 0; s < 500; ++s) mh_block_step(state, view, x, y, part, bridges, step_rng);
  CHECK(state.proposed[0] == 500);
  CHECK(state.accepted[0] == 500);
}

TEST_CASE("run_chain: trace shape, tallies, determinism") {
  ChainSetup s = cpg4_setup();
  TemperedModelView view(s.model, 1.0);
  BridgeSet bridges(s.model, s.x.size(), s.t);

  Rng rng0(42);
  Rng init_rng = rng0.stream(0);
  Path init = bridges.sample_path(s.x, s.y, init_rng);

  ChainTrace zero = run_chain(view, s.x, s.y, init, s.partition, bridges, 0, 1, rng0.stream(1));
  CHECK(zero.rows.size() == 1);
  CHECK(zero.rows[0].step == 0);

  auto run_once = [&](uint64_t seed) {
    Rng rng(seed);
    Rng init2 = rng.stream(0);
    Path p = bridges.sample_path(s.x, s.y, init2);
    return run_chain(view, s.x, s.y, p, s.partition, bridges, 400, 1, rng.stream(1));
  };
  ChainTrace t1 = run_once(11), t2 = run_once(11), t3 = run_once(12);
  REQUIRE(t1.rows.size() == t2.rows.size());
  bool identical = true;
  for (size_t i = 0; i < t1.rows.size(); ++i) {
    if (t1.rows[i].m != t2.rows[i].m || t1.rows[i].log_q != t2.rows[i].log_q ||
        t1.rows[i].accepted != t2.rows[i].accepted)
      identical = false;
  }
  CHECK(identical);
  bool differs = t1.rows.size() != t3.rows.size();
  for (size_t i = 0; !differs && i < t3.rows.size(); ++i)
    differs = t1.rows[i].log_q != t3.rows[i].log_q;
  CHECK(differs);

  uint64_t proposed = 0;
  for (auto c : t1.final_state.proposed) proposed += c;
  CHECK(proposed + t1.final_state.lazy_holds == 400);
}

TEST_CASE("lazy flag holds roughly half the steps") {
  ChainSetup s = cpg4_setup();
  TemperedModelView view(s.model, 1.0);
  BridgeSet bridges(s.model, s.x.size(), s.t);
  Rng rng(5);
  Rng init_rng = rng.stream(0);
  ChainState state = make_chain_state(view, s.x, s.y, bridges.sample_path(s.x, s.y, init_rng), s.partition);
  McmcOptions opts;
  opts.lazy = true;
  Rng step_rng = rng.stream(1);
  const int steps = 4000;
  for (int i = 0; i < steps; ++i) mh_block_step(state, view, s.x, s.y, s.partition, bridges, step_rng, opts);
  uint64_t proposed = 0;
  for (auto c : state.proposed) proposed += c;
  CHECK(proposed + state.lazy_holds == static_cast<uint64_t>(steps));
  CHECK(state.lazy_holds > steps / 2 - 200);
  CHECK(state.lazy_holds < steps / 2 + 200);
}

TEST_CASE("block proposals never touch events outside the block") {
  ContextModel m = test::cpg(2.0);
  Sequence x = seq(m, "TTCATTCATT"), y = seq(m, "TTTGTTTGTT");
  auto res = build_island_partition(m, x, y);
  REQUIRE(res.ok());
  const IslandPartition& part = *res.partition;
  REQUIRE(part.B() == 2);
  TemperedModelView view(m, 1.0);
  BridgeSet bridges(m, x.size(), 0.4);
  Rng rng(3);
  Rng init_rng = rng.stream(0);
  ChainState state = make_chain_state(view, x, y, bridges.sample_path(x, y, init_rng), part);
  Rng step_rng = rng.stream(1);
  for (int s = 0; s < 200; ++s) {
    Path before = state.path;
    StepOutcome out = mh_block_step(state, view, x, y, part, bridges, step_rng);
    REQUIRE(out.block >= 0);
    // the complement block's events must be unchanged
    int other = 1 - out.block;
    BlockPath before_other = project(before, part.block_sites(other));
    BlockPath after_other = project(state.path, part.block_sites(other));
    REQUIRE(before_other.events.size() == after_other.events.size());
    for (size_t j = 0; j < before_other.events.size(); ++j) {
      CHECK(before_other.events[j].t == after_other.events[j].t);
      CHECK(before_other.events[j].to == after_other.events[j].to);
    }
  }
}

TEST_CASE("independent-site equilibrium matches the direct bridge law") {
  // With phi == 1 the chain's stationary law is the ISM bridge itself.
  ContextModel m = test::symmetric_model();
  Sequence x = seq(m, "ACT"), y = seq(m, "ACT");
  IslandPartition part = single_block_partition(m, x, y);
  TemperedModelView view(m, 1.0);
  BridgeSet bridges(m, x.size(), 0.3);

  Rng rng(17);
  Rng init_rng = rng.stream(0);
  ChainState state = make_chain_state(view, x, y, bridges.sample_path(x, y, init_rng), part);
  Rng step_rng = rng.stream(1);
  std::vector<int64_t> chain_counts, direct_counts;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) {
    mh_block_step(state, view, x, y, part, bridges, step_rng);
    size_t mm = static_cast<size_t>(state.path.m());
    if (chain_counts.size() <= mm) chain_counts.resize(mm + 1, 0);
    ++chain_counts[mm];
  }
  Rng direct_rng(18);
  for (int i = 0; i < draws; ++i) {
    Rng r = direct_rng.stream(static_cast<uint64_t>(i));
    size_t mm = static_cast<size_t>(bridges.sample_path(x, y, r).m());
    if (direct_counts.size() <= mm) direct_counts.resize(mm + 1, 0);
    ++direct_counts[mm];
  }
  CHECK(two_sample_chisq_pvalue(chain_counts, direct_counts) > 0.001);
}

TEST_CASE("chain mean jump count agrees with the importance-sampling oracle") {
  ChainSetup s = cpg4_setup();
  TemperedModelView view(s.model, 1.0);
  BridgeSet bridges(s.model, s.x.size(), s.t);

  // self-normalized IS from the ISM bridge
  const int n_is = 200000;
  Rng is_rng(23);
  std::vector<double> logw(n_is), fval(n_is);
  for (int i = 0; i < n_is; ++i) {
    Rng r = is_rng.stream(static_cast<uint64_t>(i));
    Path p = bridges.sample_path(s.x, s.y, r);
    logw[static_cast<size_t>(i)] =
        log_density_dsm(view, s.x, s.y, p) - log_density_ism(s.model, s.x, s.y, p);
    fval[static_cast<size_t>(i)] = p.m();
  }
  double lse = log_sum_exp(logw);
  double is_mean = 0.0;
  for (int i = 0; i < n_is; ++i)
    is_mean += std::exp(logw[static_cast<size_t>(i)] - lse) * fval[static_cast<size_t>(i)];
  double is_var = 0.0;
  for (int i = 0; i < n_is; ++i) {
    double w = std::exp(logw[static_cast<size_t>(i)] - lse);
    is_var += w * w * (fval[static_cast<size_t>(i)] - is_mean) * (fval[static_cast<size_t>(i)] - is_mean);
  }
  double is_se = std::sqrt(is_var);

  // chain estimate with batch-means standard error
  const int steps = 200000, burn = 5000;
  Rng rng(29);
  Rng init_rng = rng.stream(0);
  ChainState state = make_chain_state(view, s.x, s.y, bridges.sample_path(s.x, s.y, init_rng), s.partition);
  Rng step_rng = rng.stream(1);
  for (int i = 0; i < burn; ++i) mh_block_step(state, view, s.x, s.y, s.partition, bridges, step_rng);
  const int batches = 50;
  std::vector<double> batch_mean(batches, 0.0);
  int per_batch = steps / batches;
  for (int b = 0; b < batches; ++b) {
    double acc = 0.0;
    for (int i = 0; i < per_batch; ++i) {
      mh_block_step(state, view, s.x, s.y, s.partition, bridges, step_rng);
      acc += state.path.m();
    }
    batch_mean[static_cast<size_t>(b)] = acc / per_batch;
  }
  double chain_mean = 0.0;
  for (double v : batch_mean) chain_mean += v;
  chain_mean /= batches;
  double bvar = 0.0;
  for (double v : batch_mean) bvar += (v - chain_mean) * (v - chain_mean);
  bvar /= (batches - 1);
  double chain_se = std::sqrt(bvar / batches);

  double combined = std::sqrt(chain_se * chain_se + is_se * is_se);
  CHECK(std::abs(chain_mean - is_mean) <= 3.0 * combined);
}

TEST_CASE("cached log density matches recomputation along the chain") {
  ChainSetup s = cpg4_setup(3.0);
  TemperedModelView view(s.model, 0.75);
  BridgeSet bridges(s.model, s.x.size(), s.t);
  Rng rng(31);
  Rng init_rng = rng.stream(0);
  ChainState state = make_chain_state(view, s.x, s.y, bridges.sample_path(s.x, s.y, init_rng), s.partition);
  McmcOptions opts;
  opts.cache_check_every = 1;  // recheck the incremental cache at every step
  Rng step_rng = rng.stream(1);
  for (int i = 0; i < 2000; ++i)
    CHECK_NOTHROW(mh_block_step(state, view, s.x, s.y, s.partition, bridges, step_rng, opts));
}
