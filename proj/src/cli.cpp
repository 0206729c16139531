#include "ctsmc/cli.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "ctsmc/bench.hpp"
#include "ctsmc/bounds.hpp"
#include "ctsmc/bridge.hpp"
#include "ctsmc/mcmc.hpp"
#include "ctsmc/oracle.hpp"
#include "ctsmc/pathio.hpp"
#include "ctsmc/report.hpp"
#include "ctsmc/smc.hpp"
#include "ctsmc/threading.hpp"
#include "ctsmc/toml.hpp"

namespace ctsmc::cli {

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Sequence load_sequence_arg(const std::string& arg, const Alphabet& alphabet) {
  if (std::filesystem::exists(arg)) {
    std::string text = slurp(arg);
    std::string joined;
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
      if (!line.empty() && line[0] == '>') continue;  // FASTA header
      joined += line;
    }
    return parse_sequence(joined, alphabet);
  }
  return parse_sequence(arg, alphabet);
}

// Flags win over config-file values; unknown file keys are rejected.
struct ConfigMerge {
  std::optional<toml::Table> file;
  Json provenance = Json::object();
  std::set<std::string> known;

  void load(const std::string& path) {
    if (path.empty()) return;
    auto doc = toml::parse_file(path);
    file = doc.section("");
    for (const auto& [name, table] : doc.sections)
      if (!name.empty() && !table.values.empty())
        throw ValidationError("config file must be flat; unexpected section [" + name + "]");
  }

  template <typename T>
  void merge(const std::string& key, const CLI::Option* opt, T& value) {
    known.insert(key);
    bool in_file = file && file->has(key);
    if (opt != nullptr && opt->count() > 0) {
      if (in_file) provenance[key] = "flag (overrides file)";
      return;
    }
    if (!in_file) return;
    assign(key, value);
    provenance[key] = "file";
  }

  void assign(const std::string& key, double& v) { v = file->at(key).as_number(); }
  void assign(const std::string& key, unsigned& v) { v = static_cast<unsigned>(file->at(key).as_number()); }
  void assign(const std::string& key, int& v) { v = static_cast<int>(file->at(key).as_number()); }
  void assign(const std::string& key, int64_t& v) { v = static_cast<int64_t>(file->at(key).as_number()); }
  void assign(const std::string& key, uint64_t& v) { v = static_cast<uint64_t>(file->at(key).as_number()); }
  void assign(const std::string& key, bool& v) { v = file->at(key).as_bool(); }
  void assign(const std::string& key, std::string& v) { v = file->at(key).as_string(); }

  void finish() const {
    if (!file) return;
    for (const auto& [key, v] : file->values)
      if (!known.count(key)) throw ValidationError("unknown config key '" + key + "'");
  }
};

struct CommonOpts {
  std::string model_path;
  std::string from_str, to_str;
  double t = -1.0;  // sentinel: required for sequence subcommands
  uint64_t seed = 1;
  unsigned threads = 1;
  std::string out_path;
  std::string format = "json";
  std::string config_path;
  int64_t state_cap = kDefaultStateCap;
  bool timings = false;
  Json provenance = Json::object();

  CLI::Option* opt_model = nullptr;
  CLI::Option* opt_from = nullptr;
  CLI::Option* opt_to = nullptr;
  CLI::Option* opt_t = nullptr;
  CLI::Option* opt_seed = nullptr;
  CLI::Option* opt_threads = nullptr;
  CLI::Option* opt_out = nullptr;
  CLI::Option* opt_format = nullptr;
  CLI::Option* opt_cap = nullptr;
  CLI::Option* opt_timings = nullptr;

  void attach(CLI::App* cmd, bool needs_sequences = true) {
    opt_model = cmd->add_option("--model", model_path, "model file (toml)");
    if (needs_sequences) {
      opt_from = cmd->add_option("--from", from_str, "start sequence (literal or FASTA file)");
      opt_to = cmd->add_option("--to", to_str, "end sequence (literal or FASTA file)");
      opt_t = cmd->add_option("-T,--T", t, "time horizon");
    }
    opt_seed = cmd->add_option("--seed", seed, "master RNG seed");
    opt_threads = cmd->add_option("--threads", threads, "worker thread count");
    opt_out = cmd->add_option("--out", out_path, "report path ('-' or empty: stdout)");
    opt_format = cmd->add_option("--format", format, "report format: json|csv");
    opt_cap = cmd->add_option("--state-cap", state_cap, "max enumerated states for the oracle");
    opt_timings = cmd->add_flag("--timings", timings, "include wall-clock time in the report");
  }

  void merge(ConfigMerge& cfg, bool needs_sequences = true) {
    cfg.merge("model", opt_model, model_path);
    if (needs_sequences) {
      cfg.merge("from", opt_from, from_str);
      cfg.merge("to", opt_to, to_str);
      cfg.merge("T", opt_t, t);
    }
    cfg.merge("seed", opt_seed, seed);
    cfg.merge("threads", opt_threads, threads);
    cfg.merge("out", opt_out, out_path);
    cfg.merge("format", opt_format, format);
    cfg.merge("state-cap", opt_cap, state_cap);
    cfg.merge("timings", opt_timings, timings);
  }

  void validate(bool needs_sequences = true) const {
    if (model_path.empty()) throw ValidationError("--model is required");
    if (needs_sequences) {
      if (from_str.empty() || to_str.empty()) throw ValidationError("--from and --to are required");
      if (!(t >= 0.0)) throw ValidationError("--T is required and must be nonnegative");
    }
    if (format != "json" && format != "csv") throw ValidationError("--format must be json or csv");
    if (threads < 1) throw ValidationError("--threads must be at least 1");
  }

  Json config_json(const std::string& subcommand) const {
    Json c;
    c["subcommand"] = subcommand;
    if (!model_path.empty()) c["model"] = model_path;
    if (!from_str.empty()) c["from"] = from_str;
    if (!to_str.empty()) c["to"] = to_str;
    c["seed"] = seed;
    c["threads"] = threads;
    c["format"] = format;
    c["state_cap"] = state_cap;
    c["format_version"] = kReportFormatVersion;
    if (!provenance.empty()) c["provenance"] = provenance;
    return c;
  }
};

struct LoadedProblem {
  ContextModel model;
  Sequence x, y;
  int r = 0;
  std::vector<std::string> warnings;
};

LoadedProblem load_problem(const CommonOpts& common) {
  LoadedProblem p{load_model(common.model_path), {}, {}, 0, {}};
  p.x = load_sequence_arg(common.from_str, p.model.alphabet);
  p.y = load_sequence_arg(common.to_str, p.model.alphabet);
  if (p.x.size() != p.y.size()) throw ValidationError("--from and --to differ in length");
  p.model.check_length(p.x.size());
  p.r = hamming_distance(p.x, p.y);
  double t_ref = 4.0 * static_cast<double>(p.r) / p.x.size();
  if (common.t >= 0.0 && common.t > t_ref) {
    std::ostringstream w;
    w << "T=" << common.t << " exceeds 4*r/n=" << t_ref
      << "; the step-size and mixing analyses assume T near r/n";
    p.warnings.push_back(w.str());
    std::cerr << "warning: " << w.str() << "\n";
  }
  return p;
}

void finalize_report(Json& report, const CommonOpts& common, const std::vector<std::string>& warnings,
                     double wall_seconds) {
  if (!warnings.empty()) report["warnings"] = warnings;
  if (common.timings) report["wall_seconds"] = wall_seconds;
  std::cerr << report["tool"].get<std::string>() << ": done in " << wall_seconds << " s\n";
  write_report(report, common.out_path, common.format);
}

Json estimate_json(const EstimateReport& rep) {
  Json r;
  r["log_z_hat"] = rep.log_z_hat;
  r["z_hat"] = std::exp(rep.log_z_hat);
  r["log_z0_ism"] = rep.log_z0;
  r["betas"] = rep.betas;
  r["stages"] = rep.betas.size() - 1;
  r["stage_log_mean_weight"] = rep.stage_log_mean_weight;
  r["stage_ess"] = rep.stage_ess;
  r["stage_accept_rate"] = rep.stage_accept_rate;
  r["stage_chi2_estimate"] = rep.stage_chi2;
  r["N"] = rep.n_particles;
  r["s"] = rep.mutation_steps;
  r["seed"] = rep.seed;
  r["blocks"] = rep.blocks;
  r["r_star"] = rep.r_star;
  r["island_partition"] = rep.island_partition;
  r["bridge_collision_resamples"] = rep.bridge_collisions;
  r["weight_second_moment_log"] = rep.weight_second_moment_log;
  double var_rel = 0.0;
  for (double c : rep.stage_chi2) var_rel += std::max(0.0, c - 1.0);
  r["rel_se_estimate"] = std::sqrt(var_rel / static_cast<double>(rep.n_particles));
  r["sample_size_note"] = rep.sample_size_note;
  r["mixing_assumption_note"] =
      "mutation-kernel warm-start mixing is assumed, not certified at runtime";
  return r;
}

// ---------------------------------------------------------------- exact ----

int cmd_exact(const CommonOpts& common, double beta, double tol) {
  auto t0 = std::chrono::steady_clock::now();
  LoadedProblem p = load_problem(common);
  if (!(tol > 0.0)) throw ValidationError("--tol must be positive");
  auto res = exact_marginal(p.model, p.x, p.y, common.t, beta, tol, common.state_cap, common.threads);
  Json config = common.config_json("exact");
  config["T"] = common.t;
  config["beta"] = beta;
  config["tol"] = tol;
  Json result;
  result["p"] = res.p;
  result["truncation_order"] = res.truncation_order;
  result["Lambda"] = res.lambda;
  Json report = make_report("exact", config, result);
  double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  finalize_report(report, common, p.warnings, wall);
  return 0;
}

// ----------------------------------------------------------- sample-ism ----

int cmd_sample_ism(const CommonOpts& common, int64_t n_draws, const std::string& dump_path) {
  auto t0 = std::chrono::steady_clock::now();
  LoadedProblem p = load_problem(common);
  if (n_draws < 1) throw ValidationError("--n-draws must be positive");
  BridgeSet bridges(p.model, p.x.size(), common.t);
  Rng master(common.seed);
  std::vector<Path> paths(static_cast<size_t>(n_draws));
  uint64_t collisions = 0;
  double sum_m = 0.0, sum_m2 = 0.0;
  for (int64_t i = 0; i < n_draws; ++i) {
    Rng rng = master.stream(static_cast<uint64_t>(i)).stream(0);
    paths[static_cast<size_t>(i)] = bridges.sample_path(p.x, p.y, rng, &collisions);
    double m = paths[static_cast<size_t>(i)].m();
    sum_m += m;
    sum_m2 += m * m;
  }
  if (!dump_path.empty()) {
    std::ofstream out(dump_path, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + dump_path);
    dump_paths(out, paths, p.model.alphabet);
  }
  Json config = common.config_json("sample-ism");
  config["T"] = common.t;
  config["n_draws"] = n_draws;
  if (!dump_path.empty()) config["dump"] = dump_path;
  Json result;
  result["n_draws"] = n_draws;
  double mean_m = sum_m / static_cast<double>(n_draws);
  result["mean_jump_count"] = mean_m;
  result["var_jump_count"] = sum_m2 / static_cast<double>(n_draws) - mean_m * mean_m;
  result["collision_resamples"] = collisions;
  result["log_z0_ism"] = ism_log_marginal(p.model, p.x, p.y, common.t);
  Json report = make_report("sample-ism", config, result);
  double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  finalize_report(report, common, p.warnings, wall);
  return 0;
}

// ---------------------------------------------------------- sample-mcmc ----

IslandPartition partition_from_arg(const std::string& arg, const ContextModel& model,
                                   const Sequence& x, const Sequence& y,
                                   std::vector<std::string>& warnings) {
  if (arg == "auto") {
    auto res = build_island_partition(model, x, y);
    if (res.ok()) return *res.partition;
    warnings.push_back("island partition infeasible (" + res.infeasible_reason +
                       "); using a single block, the r_star scaling no longer applies");
    std::cerr << "warning: " << warnings.back() << "\n";
    IslandPartition part = single_block_partition(model, x, y);
    part.island = false;
    return part;
  }
  if (arg == "single") return single_block_partition(model, x, y);
  // Otherwise: a JSON file with 1-based inclusive [lo, hi] block ranges.
  Json spec;
  try {
    spec = Json::parse(slurp(arg));
  } catch (const Json::parse_error& e) {
    throw ValidationError("partition file " + arg + ": " + e.what());
  }
  std::vector<std::pair<int, int>> blocks;
  for (const auto& pair : spec) {
    if (!pair.is_array() || pair.size() != 2) throw ValidationError("partition file: expected [lo, hi] pairs");
    blocks.emplace_back(pair[0].get<int>() - 1, pair[1].get<int>() - 1);
  }
  IslandPartition part = partition_from_blocks(model, x, y, blocks);
  if (!part.island) {
    warnings.push_back("file partition has mutated division sites; not an island partition");
    std::cerr << "warning: " << warnings.back() << "\n";
  }
  return part;
}

int cmd_sample_mcmc(const CommonOpts& common, double beta, uint64_t steps, uint64_t thin, bool lazy,
                    const std::string& partition_arg, const std::string& trace_path,
                    const std::string& dump_path) {
  auto t0 = std::chrono::steady_clock::now();
  LoadedProblem p = load_problem(common);
  if (beta < 0.0 || beta > 1.0) throw ValidationError("--beta must lie in [0,1]");
  IslandPartition partition = partition_from_arg(partition_arg, p.model, p.x, p.y, p.warnings);

  uint64_t effective_thin = std::max<uint64_t>(thin, 1);
  if (steps / effective_thin > 2000000)
    throw ValidationError("trace would exceed 2e6 rows; raise --thin");

  TemperedModelView view(p.model, beta);
  BridgeSet bridges(p.model, p.x.size(), common.t);
  Rng master(common.seed);
  Rng init_rng = master.stream(0).stream(0);
  Path init = bridges.sample_path(p.x, p.y, init_rng);
  McmcOptions opts;
  opts.lazy = lazy;
  Rng chain_rng = master.stream(1);
  std::vector<Path> thinned;
  ChainTrace trace = run_chain(view, p.x, p.y, std::move(init), partition, bridges, steps,
                               effective_thin, chain_rng, opts,
                               dump_path.empty() ? nullptr : &thinned);

  if (!trace_path.empty()) {
    std::ofstream out(trace_path, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + trace_path);
    write_trace_tsv(out, trace);
  }
  if (!dump_path.empty()) {
    std::ofstream out(dump_path, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + dump_path);
    dump_paths(out, thinned, p.model.alphabet);
  }

  const ChainState& st = trace.final_state;
  Json config = common.config_json("sample-mcmc");
  config["T"] = common.t;
  config["beta"] = beta;
  config["steps"] = steps;
  config["thin"] = thin;
  config["lazy"] = lazy;
  config["partition"] = partition_arg;
  if (!trace_path.empty()) config["trace"] = trace_path;
  if (!dump_path.empty()) config["dump"] = dump_path;

  Json result;
  uint64_t proposed = 0, accepted = 0;
  Json per_block = Json::array();
  for (size_t j = 0; j < st.proposed.size(); ++j) {
    proposed += st.proposed[j];
    accepted += st.accepted[j];
    Json b;
    b["block"] = j + 1;
    b["proposed"] = st.proposed[j];
    b["accepted"] = st.accepted[j];
    b["rate"] = st.proposed[j] ? static_cast<double>(st.accepted[j]) / st.proposed[j] : 0.0;
    per_block.push_back(b);
  }
  result["steps"] = steps;
  result["acceptance_rate"] = proposed ? static_cast<double>(accepted) / proposed : 0.0;
  result["per_block"] = per_block;
  result["lazy_holds"] = st.lazy_holds;
  result["collision_rejects"] = st.collision_rejects;
  result["r_star"] = partition.r_star;
  Json blocks = Json::array();
  for (auto [lo, hi] : partition.blocks) blocks.push_back(Json::array({lo + 1, hi + 1}));
  Json partition_json;
  partition_json["blocks"] = blocks;
  Json division = Json::array(), boundary = Json::array();
  for (const auto& d : partition.division) {
    Json dj = Json::array();
    for (int i : d) dj.push_back(i + 1);
    division.push_back(dj);
  }
  for (const auto& d : partition.boundary) {
    Json dj = Json::array();
    for (int i : d) dj.push_back(i + 1);
    boundary.push_back(dj);
  }
  partition_json["division_sites"] = division;
  partition_json["boundary_sites"] = boundary;
  partition_json["island"] = partition.island;
  result["partition"] = partition_json;
  result["final_m"] = st.path.m();
  result["final_log_q"] = st.log_q;
  double mean_m = 0.0;
  for (const auto& row : trace.rows) mean_m += row.m;
  result["trace_mean_m"] = trace.rows.empty() ? 0.0 : mean_m / static_cast<double>(trace.rows.size());

  Json report = make_report("sample-mcmc", config, result);
  double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  finalize_report(report, common, p.warnings, wall);
  return 0;
}

// ---------------------------------------------------- estimate-is / smc ----

std::vector<std::tuple<std::string, std::string, double>> parse_batch(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open batch file: " + path);
  std::vector<std::tuple<std::string, std::string, double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string x, y;
    double t;
    if (!(ss >> x >> y >> t)) throw ValidationError("batch rows must be 'x<TAB>y<TAB>T'");
    rows.emplace_back(x, y, t);
  }
  if (rows.empty()) throw ValidationError("batch file has no rows");
  return rows;
}

std::vector<double> parse_ladder_file(const std::string& path) {
  std::string text = slurp(path);
  std::vector<double> betas;
  if (!text.empty() && text.find('[') != std::string::npos) {
    Json arr = Json::parse(text);
    for (const auto& v : arr) betas.push_back(v.get<double>());
  } else {
    std::istringstream ss(text);
    double b;
    while (ss >> b) betas.push_back(b);
  }
  if (betas.size() < 2 || betas.front() != 0.0 || betas.back() != 1.0)
    throw ValidationError("ladder file must list temperatures from 0 to 1");
  for (size_t i = 1; i < betas.size(); ++i)
    if (!(betas[i] > betas[i - 1])) throw ValidationError("ladder temperatures must increase");
  return betas;
}

int cmd_estimate(const CommonOpts& common, bool smc, int64_t n_particles, int s_steps,
                 double safety, bool safety_given, const std::string& ladder_file,
                 const std::string& batch_path, bool systematic, bool lazy, bool single_block,
                 int replicates, bool adaptive, double ess_target) {
  auto t0 = std::chrono::steady_clock::now();
  if (n_particles < 2) throw ValidationError("--N must be at least 2");
  if (replicates < 1) throw ValidationError("--replicates must be positive");
  if (!ladder_file.empty() && safety_given)
    throw ValidationError("--ladder-file conflicts with --safety (pick one ladder spec)");
  if (adaptive && !ladder_file.empty())
    throw ValidationError("--adaptive conflicts with --ladder-file (pick one ladder spec)");
  if (!(ess_target > 0.0) || ess_target >= 1.0)
    throw ValidationError("--ess-target must lie in (0,1)");

  ContextModel model = load_model(common.model_path);
  SmcOptions opts;
  opts.n_particles = n_particles;
  opts.mutation_steps = s_steps;
  opts.threads = common.threads;
  opts.systematic_resampling = systematic;
  opts.lazy_kernel = lazy;
  opts.single_block = single_block;
  opts.adaptive_ladder = adaptive;
  opts.adaptive_ess_target = ess_target;

  auto one_case = [&](const Sequence& x, const Sequence& y, double t, uint64_t seed) -> Json {
    TemperatureLadder ladder;
    if (smc) {
      if (!ladder_file.empty()) {
        ladder.betas = parse_ladder_file(ladder_file);
        ladder.rule = "file";
        ladder.safety = 0.0;
        ladder.zeta_value = zeta(x.size(), hamming_distance(x, y), t);
      } else {
        ladder = build_ladder(model, x, y, t, safety);
      }
    }
    Json out;
    if (replicates == 1) {
      EstimateReport rep = smc ? run_smc(model, x, y, t, ladder, seed, opts)
                               : run_is(model, x, y, t, seed, opts);
      out = estimate_json(rep);
    } else {
      std::vector<double> zs;
      Json reps = Json::array();
      for (int rix = 0; rix < replicates; ++rix) {
        EstimateReport rep = smc ? run_smc(model, x, y, t, ladder, seed + static_cast<uint64_t>(rix), opts)
                                 : run_is(model, x, y, t, seed + static_cast<uint64_t>(rix), opts);
        zs.push_back(std::exp(rep.log_z_hat));
        if (rix == 0) out = estimate_json(rep);
        reps.push_back(std::exp(rep.log_z_hat));
      }
      double mean = 0.0;
      for (double z : zs) mean += z;
      mean /= static_cast<double>(zs.size());
      double var = 0.0;
      for (double z : zs) var += (z - mean) * (z - mean);
      var /= std::max<size_t>(1, zs.size() - 1);
      out["replicates"] = reps;
      out["replicate_mean_z"] = mean;
      out["replicate_se_z"] = std::sqrt(var / static_cast<double>(zs.size()));
    }
    if (smc) {
      out["ladder_rule"] = adaptive ? "adaptive" : ladder.rule;
      if (!adaptive && !ladder.rule.empty() && ladder.rule != "file") {
        out["delta_beta_cap"] = json_real(ladder.delta_beta_cap);
        out["log10_closed_form_cap"] = json_real(ladder.log10_closed_form_cap);
      }
    }
    return out;
  };

  const char* tool = smc ? "estimate-smc" : "estimate-is";
  Json config = common.config_json(tool);
  config["N"] = n_particles;
  if (smc) {
    config["s"] = s_steps;
    config["safety"] = safety;
    if (!ladder_file.empty()) config["ladder_file"] = ladder_file;
    config["systematic_resampling"] = systematic;
    config["lazy"] = lazy;
    config["single_block"] = single_block;
    config["adaptive"] = adaptive;
    if (adaptive) config["ess_target"] = ess_target;
  }
  if (replicates > 1) config["replicates"] = replicates;

  std::vector<std::string> warnings;
  Json result;
  if (batch_path.empty()) {
    LoadedProblem p = load_problem(common);
    warnings = p.warnings;
    config["T"] = common.t;
    result = one_case(p.x, p.y, common.t, common.seed);
  } else {
    config["batch"] = batch_path;
    auto rows = parse_batch(batch_path);
    Json results = Json::array();
    uint64_t row_idx = 0;
    for (const auto& [xs, ys, t] : rows) {
      Sequence x = load_sequence_arg(xs, model.alphabet);
      Sequence y = load_sequence_arg(ys, model.alphabet);
      Json row = one_case(x, y, t, common.seed + row_idx);
      row["row"] = row_idx;
      row["T"] = t;
      results.push_back(row);
      ++row_idx;
    }
    result["rows"] = results;
  }

  Json report = make_report(tool, config, result);
  double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  finalize_report(report, common, warnings, wall);
  return 0;
}

// ---------------------------------------------------------- check-bounds ----

int cmd_check_bounds(const CommonOpts& common, double epsilon, double omega, double theta,
                     const std::string& samples_path, int64_t n_samples) {
  auto t0 = std::chrono::steady_clock::now();
  LoadedProblem p = load_problem(common);
  std::vector<std::string> warnings = p.warnings;

  IslandPartition partition;
  {
    auto res = build_island_partition(p.model, p.x, p.y);
    if (res.ok()) {
      partition = *res.partition;
    } else {
      partition = single_block_partition(p.model, p.x, p.y);
      partition.island = false;
      warnings.push_back("island partition infeasible: " + res.infeasible_reason);
    }
  }

  LambdaTheta lam = lambda_theta(p.model, theta, common.t);
  LambdaTheta lam_e = lambda_theta(p.model, std::exp(1.0), common.t);
  RateSpread spread = rate_spread(p.model);

  Json result;
  Json lam_json;
  lam_json["theta"] = theta;
  lam_json["lambda1"] = json_real(lam.lambda1);
  lam_json["lambda2"] = json_real(lam.lambda2);
  lam_json["lambda3"] = json_real(lam.lambda3);
  lam_json["lambda"] = json_real(lam.lambda);
  lam_json["log_lambda"] = json_real(lam.log_lambda);
  result["lambda_theta"] = lam_json;
  Json spread_json;
  spread_json["gamma_max"] = p.model.gamma_max;
  spread_json["gamma_min"] = p.model.gamma_min;
  spread_json["phi_max"] = p.model.phi_max;
  spread_json["phi_min"] = p.model.phi_min;
  spread_json["delta"] = spread.delta;
  spread_json["delta_tilde"] = spread.delta_tilde;
  result["rate_spread"] = spread_json;

  double log3b_eps = std::log(3.0 * partition.B() / epsilon);
  auto m_eps = [&](double z) { return z * lam_e.lambda + log3b_eps; };
  Json zetas;
  double zeta_all = zeta(p.x.size(), p.r, common.t);
  zetas["all_sites"] = zeta_all;
  Json blocks = Json::array(), divisions = Json::array(), boundaries = Json::array();
  for (int j = 0; j < partition.B(); ++j) {
    blocks.push_back(zeta_of_sites(p.x, p.y, partition.block_sites(j), common.t));
    divisions.push_back(zeta_of_sites(p.x, p.y, partition.division[static_cast<size_t>(j)], common.t));
    boundaries.push_back(zeta_of_sites(p.x, p.y, partition.boundary[static_cast<size_t>(j)], common.t));
  }
  zetas["blocks"] = blocks;
  zetas["division_sets"] = divisions;
  zetas["boundary_sets"] = boundaries;
  zetas["division_all"] = zeta_of_sites(p.x, p.y, partition.all_division(), common.t);
  zetas["boundary_all"] = zeta_of_sites(p.x, p.y, partition.all_boundary(), common.t);
  result["zeta"] = zetas;
  Json m_thresholds;
  m_thresholds["epsilon"] = epsilon;
  m_thresholds["all_sites"] = json_real(m_eps(zeta_all));
  Json mb = Json::array();
  for (const auto& z : blocks) mb.push_back(json_real(m_eps(z.get<double>())));
  m_thresholds["blocks"] = mb;
  result["m_epsilon"] = m_thresholds;

  MixingTimeBound mix = mixing_time_bound(p.model, partition, p.x, p.y, common.t, epsilon, omega);
  Json mix_json;
  mix_json["epsilon"] = epsilon;
  mix_json["omega"] = omega;
  mix_json["log_value"] = json_real(mix.log_value);
  mix_json["value"] = json_real(mix.value);
  mix_json["c1"] = json_real(mix.c1);
  mix_json["c2"] = json_real(mix.c2);
  mix_json["c3"] = json_real(mix.c3);
  mix_json["lazy_chain"] = true;
  mix_json["note"] = "informational; evaluated at this run's T, never used to set s";
  result["mixing_time_bound"] = mix_json;

  TemperatureLadder ladder = build_ladder(p.model, p.x, p.y, common.t, 1.0);
  Json ladder_json;
  ladder_json["delta_beta_cap"] = json_real(ladder.delta_beta_cap);
  ladder_json["log10_closed_form_cap"] = json_real(ladder.log10_closed_form_cap);
  ladder_json["rule"] = ladder.rule;
  ladder_json["stages"] = ladder.V();
  result["tempering"] = ladder_json;

  // Sampled MGF checks: supplied paths, or fresh ISM draws reweighted to pi.
  std::vector<Path> samples;
  std::vector<double> logw;
  if (!samples_path.empty()) {
    // Dumped paths are treated as target-distributed (e.g. a long MCMC run):
    // unit weights.
    samples = load_paths(samples_path, p.model);
    for (const auto& path : samples) {
      auto v = validate(path, p.x, p.y);
      if (!v.ok()) throw ValidationError("sample path invalid: " + v.describe());
    }
    logw.assign(samples.size(), 0.0);
  } else {
    BridgeSet bridges(p.model, p.x.size(), common.t);
    Rng master(common.seed);
    TemperedModelView full(p.model, 1.0);
    samples.resize(static_cast<size_t>(n_samples));
    logw.resize(static_cast<size_t>(n_samples));
    std::vector<Path> drawn(static_cast<size_t>(n_samples));
    parallel_for(0, static_cast<size_t>(n_samples), common.threads, [&](size_t i) {
      Rng rng = master.stream(i).stream(0);
      drawn[i] = bridges.sample_path(p.x, p.y, rng);
      logw[i] = log_density_dsm(full, p.x, p.y, drawn[i]) - log_density_ism(p.model, p.x, p.y, drawn[i]);
    });
    samples = std::move(drawn);
  }

  auto mgf_json = [&](const std::vector<int>& sites, const std::string& label) {
    MgfCheck chk = check_mgf_bound(samples, &logw, p.model, p.x, p.y, sites, theta, common.t);
    Json j;
    j["set"] = label;
    j["sites"] = sites.size();
    j["edge_sites"] = chk.edge_sites;
    j["zeta"] = chk.zeta_a;
    j["log_empirical"] = json_real(chk.log_empirical);
    j["log_bound"] = json_real(chk.log_bound);
    j["pass"] = chk.pass;
    j["log10_margin"] = json_real(chk.log10_margin);
    return j;
  };
  Json mgf = Json::array();
  {
    std::vector<int> all(static_cast<size_t>(p.x.size()));
    for (int i = 0; i < p.x.size(); ++i) all[static_cast<size_t>(i)] = i;
    mgf.push_back(mgf_json(all, "all_sites"));
  }
  for (int j = 0; j < partition.B(); ++j) {
    if (!partition.division[static_cast<size_t>(j)].empty())
      mgf.push_back(mgf_json(partition.division[static_cast<size_t>(j)], "division_" + std::to_string(j + 1)));
    if (!partition.boundary[static_cast<size_t>(j)].empty())
      mgf.push_back(mgf_json(partition.boundary[static_cast<size_t>(j)], "boundary_" + std::to_string(j + 1)));
  }
  result["mgf_checks"] = mgf;

  bool in_cap = true;
  try {
    StateSpace probe(p.x.size(), p.model.a(), common.state_cap);
  } catch (const CapExceeded&) {
    in_cap = false;
  }
  if (in_cap) {
    auto l2 = check_l2_ladder(p.model, p.x, p.y, common.t, ladder.betas, 1e-10, common.state_cap,
                              common.threads);
    Json stages = Json::array();
    for (const auto& st : l2.stages) stages.push_back(st.value);
    Json l2_json;
    l2_json["stages"] = stages;
    l2_json["bound"] = kStageL2Bound;
    l2_json["all_within_bound"] = l2.all_within_bound;
    result["l2_ladder"] = l2_json;
  }

  Json config = common.config_json("check-bounds");
  config["T"] = common.t;
  config["epsilon"] = epsilon;
  config["omega"] = omega;
  config["theta"] = theta;
  if (!samples_path.empty()) config["samples"] = samples_path;
  else config["n_samples"] = n_samples;

  Json report = make_report("check-bounds", config, result);
  double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  finalize_report(report, common, warnings, wall);
  return 0;
}

// ---------------------------------------------------------- bench-island ----

int cmd_bench_island(const CommonOpts& common, int rmax, double lambda, int64_t n_particles,
                     int seeds, const std::string& csv_path, int64_t chi2_draws) {
  auto t0 = std::chrono::steady_clock::now();
  IslandBenchResult bench = bench_island(rmax, lambda, n_particles, seeds, common.seed,
                                         common.threads, common.state_cap, chi2_draws);
  std::string csv = island_bench_csv(bench);
  if (!csv_path.empty()) {
    std::ofstream out(csv_path, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + csv_path);
    out << csv;
  }

  Json config = common.config_json("bench-island");
  config["rmax"] = rmax;
  config["lambda"] = lambda;
  config["N"] = n_particles;
  config["seeds"] = seeds;
  config["chi2_draws"] = chi2_draws;
  if (!csv_path.empty()) config["out_csv"] = csv_path;

  Json rows = Json::array();
  bool chi2_increasing = true;
  bool l2_bounded = true;
  bool smc_within_5pct = true;
  for (size_t i = 0; i < bench.rows.size(); ++i) {
    const auto& r = bench.rows[i];
    Json row;
    row["r_island"] = r.r_island;
    row["n"] = r.n;
    row["r"] = r.r;
    row["r_star"] = r.r_star;
    row["blocks"] = r.blocks;
    row["T"] = r.t;
    row["ladder_stages"] = r.ladder_stages;
    row["is_chi2"] = r.is_chi2;
    row["is_chi2_exact"] = r.is_chi2_exact;
    row["smc_stage_l2_max"] = r.smc_stage_l2_max;
    row["smc_l2_exact"] = r.smc_l2_exact;
    row["p_exact"] = r.p_exact;
    row["oracle_available"] = r.oracle_available;
    row["mean_abs_rel_err"] = r.mean_abs_rel_err;
    row["max_abs_rel_err"] = r.max_abs_rel_err;
    row["seeds_within_5pct"] = r.seeds_within_5pct;
    row["seeds"] = r.seeds;
    rows.push_back(row);
    if (i > 0 && !(r.is_chi2 > bench.rows[i - 1].is_chi2)) chi2_increasing = false;
    if (r.smc_stage_l2_max > kStageL2Bound) l2_bounded = false;
    if (r.oracle_available && r.max_abs_rel_err > 0.05) smc_within_5pct = false;
  }
  Json result;
  result["rows"] = rows;
  result["is_chi2_strictly_increasing"] = chi2_increasing;
  result["smc_l2_within_bound"] = l2_bounded;
  result["smc_within_5pct_where_oracle"] = smc_within_5pct;

  Json report = make_report("bench-island", config, result);
  double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  finalize_report(report, common, {}, wall);
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"context-dependent sequence transition probabilities via tempered SMC"};
  app.require_subcommand(1);

  // exact
  auto* exact_cmd = app.add_subcommand("exact", "matrix-exponential oracle for small n");
  CommonOpts exact_common;
  exact_common.attach(exact_cmd);
  double exact_beta = 1.0, exact_tol = 1e-12;
  auto* exact_beta_opt = exact_cmd->add_option("--beta", exact_beta, "tempering exponent");
  auto* exact_tol_opt = exact_cmd->add_option("--tol", exact_tol, "series truncation tolerance");

  // sample-ism
  auto* ism_cmd = app.add_subcommand("sample-ism", "exact endpoint-conditioned ISM bridges");
  CommonOpts ism_common;
  ism_common.attach(ism_cmd);
  int64_t ism_draws = 1000;
  std::string ism_dump;
  auto* ism_draws_opt = ism_cmd->add_option("--n-draws", ism_draws, "number of bridge draws");
  auto* ism_dump_opt = ism_cmd->add_option("--dump", ism_dump, "write drawn paths to this file");

  // sample-mcmc
  auto* mcmc_cmd = app.add_subcommand("sample-mcmc", "blocked Metropolis-Hastings on path space");
  CommonOpts mcmc_common;
  mcmc_common.attach(mcmc_cmd);
  double mcmc_beta = 1.0;
  uint64_t mcmc_steps = 10000, mcmc_thin = 1;
  bool mcmc_lazy = false;
  std::string mcmc_partition = "auto", mcmc_trace, mcmc_dump;
  auto* mcmc_beta_opt = mcmc_cmd->add_option("--beta", mcmc_beta, "tempering exponent");
  auto* mcmc_steps_opt = mcmc_cmd->add_option("--steps", mcmc_steps, "MH steps");
  auto* mcmc_thin_opt = mcmc_cmd->add_option("--thin", mcmc_thin, "record every k-th step");
  auto* mcmc_lazy_opt = mcmc_cmd->add_flag("--lazy", mcmc_lazy, "lazy chain (hold with prob 1/2)");
  auto* mcmc_part_opt = mcmc_cmd->add_option("--partition", mcmc_partition, "auto|single|<file>");
  auto* mcmc_trace_opt = mcmc_cmd->add_option("--trace", mcmc_trace, "write thinned trace TSV");
  auto* mcmc_dump_opt = mcmc_cmd->add_option("--dump", mcmc_dump, "write the final path");

  // estimate-is
  auto* is_cmd = app.add_subcommand("estimate-is", "ISM importance-sampling estimate");
  CommonOpts is_common;
  is_common.attach(is_cmd);
  int64_t is_n = 4096;
  std::string is_batch;
  auto* is_n_opt = is_cmd->add_option("-N,--N", is_n, "number of draws");
  auto* is_batch_opt = is_cmd->add_option("--batch", is_batch, "TSV of (x, y, T) rows");

  // estimate-smc
  auto* smc_cmd = app.add_subcommand("estimate-smc", "tempered SMC estimate");
  CommonOpts smc_common;
  smc_common.attach(smc_cmd);
  int64_t smc_n = 4096;
  int smc_s = -1;
  double smc_safety = 1.0;
  std::string smc_ladder_file, smc_batch;
  bool smc_systematic = false, smc_lazy = false, smc_single = false;
  int smc_replicates = 1;
  auto* smc_n_opt = smc_cmd->add_option("-N,--N", smc_n, "particles per stage");
  auto* smc_s_opt = smc_cmd->add_option("-s,--s", smc_s, "mutation steps per stage (-1: 8*B)");
  auto* smc_safety_opt = smc_cmd->add_option("--safety", smc_safety, "ladder step multiplier in (0,1]");
  auto* smc_ladder_opt = smc_cmd->add_option("--ladder-file", smc_ladder_file, "explicit temperature ladder");
  auto* smc_batch_opt = smc_cmd->add_option("--batch", smc_batch, "TSV of (x, y, T) rows");
  auto* smc_sys_opt = smc_cmd->add_flag("--systematic", smc_systematic, "systematic resampling");
  auto* smc_lazy_opt = smc_cmd->add_flag("--lazy", smc_lazy, "lazy mutation kernel");
  auto* smc_single_opt = smc_cmd->add_flag("--single-block", smc_single, "force a single block");
  auto* smc_rep_opt = smc_cmd->add_option("--replicates", smc_replicates, "independent replicate runs");
  bool smc_adaptive = false;
  double smc_ess_target = 0.5;
  auto* smc_adaptive_opt = smc_cmd->add_flag("--adaptive", smc_adaptive, "ESS-targeted ladder (extension)");
  auto* smc_ess_opt = smc_cmd->add_option("--ess-target", smc_ess_target, "adaptive ladder ESS fraction");

  // check-bounds
  auto* bounds_cmd = app.add_subcommand("check-bounds", "evaluate the closed-form bound suite");
  CommonOpts bounds_common;
  bounds_common.attach(bounds_cmd);
  double b_eps = 0.1, b_omega = 2.0, b_theta = std::exp(1.0);
  std::string b_samples;
  int64_t b_nsamples = 10000;
  auto* b_eps_opt = bounds_cmd->add_option("--epsilon", b_eps, "tail probability epsilon");
  auto* b_omega_opt = bounds_cmd->add_option("--omega", b_omega, "warm-start parameter");
  auto* b_theta_opt = bounds_cmd->add_option("--theta", b_theta, "MGF base theta");
  auto* b_samples_opt = bounds_cmd->add_option("--samples", b_samples, "path dump for empirical checks");
  auto* b_nsamples_opt = bounds_cmd->add_option("--n-samples", b_nsamples, "ISM draws when no sample file");

  // bench-island
  auto* bench_cmd = app.add_subcommand("bench-island", "IS vs SMC contrast on the island family");
  CommonOpts bench_common;
  bench_common.attach(bench_cmd, false);
  int bench_rmax = 3, bench_seeds = 20;
  double bench_lambda = 2.0;
  int64_t bench_n = 4096, bench_chi2_draws = 100000;
  std::string bench_csv;
  auto* bench_rmax_opt = bench_cmd->add_option("--rmax", bench_rmax, "largest island count");
  auto* bench_lambda_opt = bench_cmd->add_option("--lambda", bench_lambda, "CpG multiplier");
  auto* bench_n_opt = bench_cmd->add_option("-N,--N", bench_n, "particles per stage");
  auto* bench_seeds_opt = bench_cmd->add_option("--seeds", bench_seeds, "replicate seeds");
  auto* bench_csv_opt = bench_cmd->add_option("--out-csv", bench_csv, "write the benchmark table CSV");
  auto* bench_chi2_opt = bench_cmd->add_option("--chi2-draws", bench_chi2_draws,
                                               "draws for the empirical chi-square column");

  // every subcommand accepts --config
  for (auto* cmd : {exact_cmd, ism_cmd, mcmc_cmd, is_cmd, smc_cmd, bounds_cmd, bench_cmd}) {
    auto* common = [&]() -> CommonOpts* {
      if (cmd == exact_cmd) return &exact_common;
      if (cmd == ism_cmd) return &ism_common;
      if (cmd == mcmc_cmd) return &mcmc_common;
      if (cmd == is_cmd) return &is_common;
      if (cmd == smc_cmd) return &smc_common;
      if (cmd == bounds_cmd) return &bounds_common;
      return &bench_common;
    }();
    cmd->add_option("--config", common->config_path, "flat key=value config file");
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::validation);
  }

  try {
    if (app.got_subcommand(exact_cmd)) {
      ConfigMerge cfg;
      cfg.load(exact_common.config_path);
      exact_common.merge(cfg);
      cfg.merge("beta", exact_beta_opt, exact_beta);
      cfg.merge("tol", exact_tol_opt, exact_tol);
      cfg.finish();
      exact_common.provenance = cfg.provenance;
      exact_common.validate();
      return cmd_exact(exact_common, exact_beta, exact_tol);
    }
    if (app.got_subcommand(ism_cmd)) {
      ConfigMerge cfg;
      cfg.load(ism_common.config_path);
      ism_common.merge(cfg);
      cfg.merge("n-draws", ism_draws_opt, ism_draws);
      cfg.merge("dump", ism_dump_opt, ism_dump);
      cfg.finish();
      ism_common.provenance = cfg.provenance;
      ism_common.validate();
      return cmd_sample_ism(ism_common, ism_draws, ism_dump);
    }
    if (app.got_subcommand(mcmc_cmd)) {
      ConfigMerge cfg;
      cfg.load(mcmc_common.config_path);
      mcmc_common.merge(cfg);
      cfg.merge("beta", mcmc_beta_opt, mcmc_beta);
      cfg.merge("steps", mcmc_steps_opt, mcmc_steps);
      cfg.merge("thin", mcmc_thin_opt, mcmc_thin);
      cfg.merge("lazy", mcmc_lazy_opt, mcmc_lazy);
      cfg.merge("partition", mcmc_part_opt, mcmc_partition);
      cfg.merge("trace", mcmc_trace_opt, mcmc_trace);
      cfg.merge("dump", mcmc_dump_opt, mcmc_dump);
      cfg.finish();
      mcmc_common.provenance = cfg.provenance;
      mcmc_common.validate();
      return cmd_sample_mcmc(mcmc_common, mcmc_beta, mcmc_steps, mcmc_thin, mcmc_lazy,
                             mcmc_partition, mcmc_trace, mcmc_dump);
    }
    if (app.got_subcommand(is_cmd)) {
      ConfigMerge cfg;
      cfg.load(is_common.config_path);
      is_common.merge(cfg);
      cfg.merge("N", is_n_opt, is_n);
      cfg.merge("batch", is_batch_opt, is_batch);
      cfg.finish();
      is_common.provenance = cfg.provenance;
      is_common.validate(is_batch.empty());
      return cmd_estimate(is_common, false, is_n, 0, 1.0, false, "", is_batch, false, false,
                          false, 1, false, 0.5);
    }
    if (app.got_subcommand(smc_cmd)) {
      ConfigMerge cfg;
      cfg.load(smc_common.config_path);
      smc_common.merge(cfg);
      cfg.merge("N", smc_n_opt, smc_n);
      cfg.merge("s", smc_s_opt, smc_s);
      cfg.merge("safety", smc_safety_opt, smc_safety);
      cfg.merge("ladder-file", smc_ladder_opt, smc_ladder_file);
      cfg.merge("batch", smc_batch_opt, smc_batch);
      cfg.merge("systematic", smc_sys_opt, smc_systematic);
      cfg.merge("lazy", smc_lazy_opt, smc_lazy);
      cfg.merge("single-block", smc_single_opt, smc_single);
      cfg.merge("replicates", smc_rep_opt, smc_replicates);
      cfg.merge("adaptive", smc_adaptive_opt, smc_adaptive);
      cfg.merge("ess-target", smc_ess_opt, smc_ess_target);
      cfg.finish();
      smc_common.provenance = cfg.provenance;
      smc_common.validate(smc_batch.empty());
      bool safety_given = smc_safety_opt->count() > 0 || (cfg.file && cfg.file->has("safety"));
      return cmd_estimate(smc_common, true, smc_n, smc_s, smc_safety, safety_given,
                          smc_ladder_file, smc_batch, smc_systematic, smc_lazy, smc_single,
                          smc_replicates, smc_adaptive, smc_ess_target);
    }
    if (app.got_subcommand(bounds_cmd)) {
      ConfigMerge cfg;
      cfg.load(bounds_common.config_path);
      bounds_common.merge(cfg);
      cfg.merge("epsilon", b_eps_opt, b_eps);
      cfg.merge("omega", b_omega_opt, b_omega);
      cfg.merge("theta", b_theta_opt, b_theta);
      cfg.merge("samples", b_samples_opt, b_samples);
      cfg.merge("n-samples", b_nsamples_opt, b_nsamples);
      cfg.finish();
      bounds_common.provenance = cfg.provenance;
      bounds_common.validate();
      return cmd_check_bounds(bounds_common, b_eps, b_omega, b_theta, b_samples, b_nsamples);
    }
    if (app.got_subcommand(bench_cmd)) {
      ConfigMerge cfg;
      cfg.load(bench_common.config_path);
      bench_common.merge(cfg, false);
      cfg.merge("rmax", bench_rmax_opt, bench_rmax);
      cfg.merge("lambda", bench_lambda_opt, bench_lambda);
      cfg.merge("N", bench_n_opt, bench_n);
      cfg.merge("seeds", bench_seeds_opt, bench_seeds);
      cfg.merge("out-csv", bench_csv_opt, bench_csv);
      cfg.merge("chi2-draws", bench_chi2_opt, bench_chi2_draws);
      cfg.finish();
      bench_common.provenance = cfg.provenance;
      if (bench_common.format != "json" && bench_common.format != "csv")
        throw ValidationError("--format must be json or csv");
      if (bench_common.threads < 1) throw ValidationError("--threads must be at least 1");
      return cmd_bench_island(bench_common, bench_rmax, bench_lambda, bench_n, bench_seeds,
                              bench_csv, bench_chi2_draws);
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::validation);
  } catch (const NumericAbort& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::numeric_abort);
  } catch (const CapExceeded& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::cap_exceeded);
  }
  return 0;
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  args.reserve(static_cast<size_t>(argc > 0 ? argc - 1 : 0));
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace ctsmc::cli
