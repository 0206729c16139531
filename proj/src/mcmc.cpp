#include "ctsmc/mcmc.hpp"

#include <cmath>

namespace ctsmc {

namespace {

// Sites whose density terms can change when the block's events change: every
// site whose context meets the block.
std::vector<int> affected_sites(const ContextModel& model, int n, const std::vector<int>& block) {
  std::vector<char> in_block(static_cast<size_t>(n), 0);
  for (int i : block) in_block[static_cast<size_t>(i)] = 1;
  std::vector<int> out;
  for (int i = 0; i < n; ++i) {
    for (int c : model.context_sites(i, n)) {
      if (in_block[static_cast<size_t>(c)]) {
        out.push_back(i);
        break;
      }
    }
  }
  return out;
}

}  // namespace

ChainState make_chain_state(const TemperedModelView& view, const Sequence& x, const Sequence& y,
                           Path init, const IslandPartition& partition) {
  auto v = validate(init, x, y);
  if (!v.ok()) throw ValidationError("initial path invalid: " + v.describe());
  ChainState state;
  state.log_q = log_density_dsm(view, x, y, init);
  state.path = std::move(init);
  state.proposed.assign(static_cast<size_t>(partition.B()), 0);
  state.accepted.assign(static_cast<size_t>(partition.B()), 0);
  return state;
}

StepOutcome mh_block_step(ChainState& state, const TemperedModelView& view, const Sequence& x,
                          const Sequence& y, const IslandPartition& partition,
                          const BridgeSet& bridges, Rng& rng, const McmcOptions& opts) {
  ++state.step;
  if (opts.lazy && rng.uniform() < 0.5) {
    ++state.lazy_holds;
    return {};
  }
  int B = partition.B();
  int j = B == 1 ? 0 : static_cast<int>(rng.uniform_index(static_cast<uint64_t>(B)));
  ++state.proposed[static_cast<size_t>(j)];
  StepOutcome outcome;
  outcome.block = j;

  std::vector<int> block_sites = partition.block_sites(j);
  std::vector<int> affected = affected_sites(*view.model, x.size(), block_sites);

  BlockPath current_block = project(state.path, block_sites);
  std::optional<Path> proposal;
  BlockPath proposed_block;
  for (int attempt = 0; attempt <= opts.collision_retries; ++attempt) {
    proposed_block = bridges.sample_block(block_sites, x, y, rng);
    proposal = merge(state.path, block_sites, proposed_block);
    if (proposal) break;
  }
  if (!proposal) {
    ++state.collision_rejects;
    return outcome;
  }

  double t = state.path.horizon;
  double target_delta = log_density_sites(view, x, y, *proposal, affected) -
                        log_density_sites(view, x, y, state.path, affected);
  double proposal_delta = log_density_ism_block(*view.model, x, y, proposed_block, t) -
                          log_density_ism_block(*view.model, x, y, current_block, t);
  double log_alpha = target_delta - proposal_delta;

  bool accept = log_alpha >= 0.0 || std::log(rng.uniform()) < log_alpha;
  if (accept) {
    state.path = std::move(*proposal);
    state.log_q += target_delta;
    ++state.accepted[static_cast<size_t>(j)];
    outcome.accepted = true;
  }

  if (opts.cache_check_every > 0 &&
      state.step % static_cast<uint64_t>(opts.cache_check_every) == 0) {
    double full = log_density_dsm(view, x, y, state.path);
    if (std::abs(full - state.log_q) > 1e-9 * std::max(1.0, std::abs(full)))
      throw std::logic_error("cached chain log density drifted from recomputation");
    state.log_q = full;
  }
  return outcome;
}

ChainTrace run_chain(const TemperedModelView& view, const Sequence& x, const Sequence& y,
                     Path init, const IslandPartition& partition, const BridgeSet& bridges,
                     uint64_t steps, uint64_t thin, Rng rng, const McmcOptions& opts,
                     std::vector<Path>* sample_sink) {
  ChainTrace trace;
  ChainState state = make_chain_state(view, x, y, std::move(init), partition);
  if (thin == 0) thin = 1;

  auto record = [&](int block, bool accepted) {
    TraceRow row;
    row.step = state.step;
    row.m = state.path.m();
    row.log_q = state.log_q;
    row.block = block;
    row.accepted = accepted;
    row.m_block.reserve(static_cast<size_t>(partition.B()));
    for (int j = 0; j < partition.B(); ++j)
      row.m_block.push_back(jump_counts(state.path, partition.block_sites(j)));
    trace.rows.push_back(std::move(row));
  };

  record(-1, false);
  for (uint64_t s = 1; s <= steps; ++s) {
    StepOutcome outcome = mh_block_step(state, view, x, y, partition, bridges, rng, opts);
    if (s % thin == 0 || s == steps) {
      record(outcome.block, outcome.accepted);
      if (sample_sink) sample_sink->push_back(state.path);
    }
  }
  trace.final_state = std::move(state);
  return trace;
}

}  // namespace ctsmc
