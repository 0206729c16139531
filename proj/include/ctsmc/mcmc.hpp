#ifndef CTSMC_MCMC_HPP
#define CTSMC_MCMC_HPP

#include <vector>

#include "ctsmc/bridge.hpp"
#include "ctsmc/partition.hpp"
#include "ctsmc/path.hpp"
#include "ctsmc/rng.hpp"

namespace ctsmc {

struct McmcOptions {
  bool lazy = false;          // K' = (I + K)/2
  int collision_retries = 8;  // then count as a rejection
  int cache_check_every = 512;
};

// One chain: current path plus tallies and a cached target log density that is
// updated incrementally and spot-checked against full recomputation.
struct ChainState {
  Path path;
  double log_q = 0.0;
  uint64_t step = 0;
  std::vector<uint64_t> proposed;  // per block
  std::vector<uint64_t> accepted;  // per block
  uint64_t lazy_holds = 0;
  uint64_t collision_rejects = 0;
};

ChainState make_chain_state(const TemperedModelView& view, const Sequence& x, const Sequence& y,
                           Path init, const IslandPartition& partition);

struct StepOutcome {
  int block = -1;  // -1 when a lazy hold skipped the proposal
  bool accepted = false;
};

// Blocked Metropolis-Hastings update: pick a block uniformly, propose its site
// paths from the endpoint-conditioned ISM, accept on the tempered density
// ratio net of the proposal ratio (block ISM normalizers cancel).
StepOutcome mh_block_step(ChainState& state, const TemperedModelView& view, const Sequence& x,
                          const Sequence& y, const IslandPartition& partition,
                          const BridgeSet& bridges, Rng& rng, const McmcOptions& opts = {});

struct TraceRow {
  uint64_t step = 0;
  int m = 0;
  double log_q = 0.0;
  int block = -1;     // block proposed at this step, -1 for the init row
  bool accepted = false;
  std::vector<int> m_block;
};

struct ChainTrace {
  std::vector<TraceRow> rows;
  ChainState final_state;
};

// sample_sink, when given, receives the path at every thinned step.
ChainTrace run_chain(const TemperedModelView& view, const Sequence& x, const Sequence& y,
                     Path init, const IslandPartition& partition, const BridgeSet& bridges,
                     uint64_t steps, uint64_t thin, Rng rng, const McmcOptions& opts = {},
                     std::vector<Path>* sample_sink = nullptr);

}  // namespace ctsmc

#endif
