#ifndef CTSMC_BENCH_HPP
#define CTSMC_BENCH_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "ctsmc/oracle.hpp"
#include "ctsmc/smc.hpp"

namespace ctsmc {

// The repeated-motif worst case for plain importance sampling: r_I islands of
// two adjacent mutations each, separated by unmutated corridors.
struct IslandInstance {
  Sequence x;
  Sequence y;
  int n = 0;
  int r = 0;
  double t = 0.0;  // r / n
};
IslandInstance island_instance(int r_island, const Alphabet& alphabet);
ContextModel cpg_model(double lambda);

struct IslandBenchRow {
  int r_island = 0;
  int n = 0;
  int r = 0;
  int r_star = 0;
  int blocks = 0;
  double t = 0.0;
  int ladder_stages = 0;
  double is_chi2 = 0.0;          // L2(pi, mu): exact within the cap, else empirical
  bool is_chi2_exact = false;
  double smc_stage_l2_max = 0.0; // worst per-stage L2 along the ladder
  bool smc_l2_exact = false;
  double p_exact = 0.0;          // oracle value when within the cap
  bool oracle_available = false;
  double mean_abs_rel_err = 0.0; // SMC vs oracle over seeds
  double max_abs_rel_err = 0.0;
  int seeds_within_5pct = 0;
  int seeds = 0;
  double mean_smc_seconds = 0.0;
  double mean_is_seconds = 0.0;
};

struct IslandBenchResult {
  std::vector<IslandBenchRow> rows;
  double lambda = 0.0;
  int64_t n_particles = 0;
};

IslandBenchResult bench_island(int r_island_max, double lambda, int64_t n_particles, int seeds,
                               uint64_t seed, unsigned threads, int64_t cap = kDefaultStateCap,
                               int64_t chi2_sample_size = 100000);

std::string island_bench_csv(const IslandBenchResult& result);

}  // namespace ctsmc

#endif
