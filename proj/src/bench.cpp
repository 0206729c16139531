#include "ctsmc/bench.hpp"

#include <cmath>
#include <sstream>

#include "ctsmc/oracle.hpp"

namespace ctsmc {

IslandInstance island_instance(int r_island, const Alphabet& alphabet) {
  if (r_island < 1) throw ValidationError("island instance needs r_I >= 1");
  std::string x = "T", y = "T";
  for (int i = 0; i < r_island; ++i) {
    x += "TCAT";
    y += "TTGT";
  }
  x += "T";
  y += "T";
  IslandInstance inst;
  inst.x = parse_sequence(x, alphabet);
  inst.y = parse_sequence(y, alphabet);
  inst.n = inst.x.size();
  inst.r = hamming_distance(inst.x, inst.y);
  inst.t = static_cast<double>(inst.r) / inst.n;
  return inst;
}

ContextModel cpg_model(double lambda) {
  std::ostringstream spec;
  spec << "[alphabet]\nsymbols = \"ACGT\"\n"
       << "[base_rates]\nmatrix = [[0,1,1,1],[1,0,1,1],[1,1,0,1],[1,1,1,0]]\n"
       << "[context]\nvariant = \"neighborhood\"\nk = 2\n"
       << "[multiplier]\nkind = \"cpg\"\nlambda = ";
  spec.precision(17);
  spec << lambda << "\n";
  return parse_model(spec.str());
}

IslandBenchResult bench_island(int r_island_max, double lambda, int64_t n_particles, int seeds,
                               uint64_t seed, unsigned threads, int64_t cap,
                               int64_t chi2_sample_size) {
  if (r_island_max < 1) throw ValidationError("need r_I >= 1");
  if (!(lambda > 1.0)) throw ValidationError("island benchmark needs lambda > 1");
  IslandBenchResult result;
  result.lambda = lambda;
  result.n_particles = n_particles;
  ContextModel model = cpg_model(lambda);

  for (int r_island = 1; r_island <= r_island_max; ++r_island) {
    IslandInstance inst = island_instance(r_island, model.alphabet);
    IslandBenchRow row;
    row.r_island = r_island;
    row.n = inst.n;
    row.r = inst.r;
    row.t = inst.t;
    row.r_star = r_star(model, inst.x, inst.y);

    bool in_cap = true;
    try {
      StateSpace probe(inst.n, model.a(), cap);
    } catch (const CapExceeded&) {
      in_cap = false;
    }

    if (in_cap) {
      row.p_exact = exact_marginal(model, inst.x, inst.y, inst.t, 1.0, 1e-12, cap, threads).p;
      row.oracle_available = true;
      row.is_chi2 = exact_chi_square(model, inst.x, inst.y, inst.t, 0.0, 1.0, 1e-10, cap, threads).l2;
      row.is_chi2_exact = true;
    } else {
      SmcOptions chi_opts;
      chi_opts.n_particles = chi2_sample_size;
      chi_opts.threads = threads;
      EstimateReport is_probe = run_is(model, inst.x, inst.y, inst.t, seed ^ 0xc0ffee, chi_opts);
      row.is_chi2 = is_probe.stage_chi2.front();
      row.is_chi2_exact = false;
    }

    TemperatureLadder ladder = build_ladder(model, inst.x, inst.y, inst.t, 1.0);
    row.ladder_stages = ladder.V();

    if (in_cap) {
      auto l2 = check_l2_ladder(model, inst.x, inst.y, inst.t, ladder.betas, 1e-10, cap, threads);
      row.smc_stage_l2_max = 0.0;
      for (const auto& st : l2.stages) row.smc_stage_l2_max = std::max(row.smc_stage_l2_max, st.value);
      row.smc_l2_exact = true;
    }

    SmcOptions opts;
    opts.n_particles = n_particles;
    opts.threads = threads;
    double sum_err = 0.0, max_err = 0.0, sum_smc_wall = 0.0;
    double empirical_l2_max = 0.0;
    for (int s = 0; s < seeds; ++s) {
      EstimateReport smc = run_smc(model, inst.x, inst.y, inst.t, ladder,
                                   seed + static_cast<uint64_t>(s), opts);
      row.blocks = smc.blocks;
      sum_smc_wall += smc.wall_seconds;
      for (double c : smc.stage_chi2) empirical_l2_max = std::max(empirical_l2_max, c);
      if (row.oracle_available) {
        double rel = std::abs(std::exp(smc.log_z_hat) / row.p_exact - 1.0);
        sum_err += rel;
        max_err = std::max(max_err, rel);
        if (rel <= 0.05) ++row.seeds_within_5pct;
      }
    }
    if (!in_cap) row.smc_stage_l2_max = empirical_l2_max;
    row.seeds = seeds;
    row.mean_abs_rel_err = row.oracle_available && seeds > 0 ? sum_err / seeds : 0.0;
    row.max_abs_rel_err = max_err;
    row.mean_smc_seconds = seeds > 0 ? sum_smc_wall / seeds : 0.0;

    {
      SmcOptions is_opts;
      is_opts.n_particles = n_particles;
      is_opts.threads = threads;
      EstimateReport is_run = run_is(model, inst.x, inst.y, inst.t, seed, is_opts);
      row.mean_is_seconds = is_run.wall_seconds;
    }

    result.rows.push_back(row);
  }
  return result;
}

std::string island_bench_csv(const IslandBenchResult& result) {
  std::ostringstream out;
  out.precision(12);
  // timings stay on stderr; the table must be byte-stable across runs
  out << "r_island,n,r,r_star,blocks,T,ladder_stages,is_chi2,is_chi2_exact,smc_stage_l2_max,"
         "smc_l2_exact,p_exact,oracle_available,mean_abs_rel_err,max_abs_rel_err,"
         "seeds_within_5pct,seeds\n";
  for (const auto& r : result.rows) {
    out << r.r_island << ',' << r.n << ',' << r.r << ',' << r.r_star << ',' << r.blocks << ','
        << r.t << ',' << r.ladder_stages << ',' << r.is_chi2 << ',' << (r.is_chi2_exact ? 1 : 0)
        << ',' << r.smc_stage_l2_max << ',' << (r.smc_l2_exact ? 1 : 0) << ',' << r.p_exact << ','
        << (r.oracle_available ? 1 : 0) << ',' << r.mean_abs_rel_err << ',' << r.max_abs_rel_err
        << ',' << r.seeds_within_5pct << ',' << r.seeds << '\n';
  }
  return out.str();
}

}  // namespace ctsmc
