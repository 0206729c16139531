#ifndef CTSMC_PATH_HPP
#define CTSMC_PATH_HPP

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "ctsmc/alphabet.hpp"
#include "ctsmc/model.hpp"

namespace ctsmc {

struct Event {
  double t = 0.0;
  int site = 0;     // 0-based
  uint8_t to = 0;   // new symbol after the event
};

// Globally time-ordered substitution events on [0, T] starting from x0.
struct Path {
  std::vector<Event> events;
  double horizon = 0.0;
  Sequence x0;

  int m() const { return static_cast<int>(events.size()); }
  int n() const { return x0.size(); }

  Sequence terminal() const {
    Sequence s = x0;
    for (const auto& e : events) s.sym[static_cast<size_t>(e.site)] = e.to;
    return s;
  }
};

// Events at a single site, time-ordered.
struct SitePath {
  std::vector<std::pair<double, uint8_t>> events;  // (time, new symbol)
  int m() const { return static_cast<int>(events.size()); }
};

// Events restricted to a site set.
struct BlockPath {
  std::vector<Event> events;
  std::vector<int> sites;  // sorted, 0-based
  int m() const { return static_cast<int>(events.size()); }
};

enum class PathViolation {
  none,
  x0_mismatch,
  time_out_of_range,
  ordering,
  self_substitution,
  endpoint_mismatch,
};

struct ValidationResult {
  PathViolation violation = PathViolation::none;
  int event_index = -1;

  bool ok() const { return violation == PathViolation::none; }
  std::string describe() const;
};

// Checks strict time ordering on (0, T), that every event changes the state,
// and that replaying from x ends at y.
ValidationResult validate(const Path& path, const Sequence& x, const Sequence& y);

BlockPath project(const Path& path, const std::vector<int>& sites);
SitePath project_site(const Path& path, int site);

// Replace the events at `sites` with those of `block` and re-sort by time.
// Returns nullopt on a time collision between retained and inserted events.
std::optional<Path> merge(const Path& path, const std::vector<int>& sites, const BlockPath& block);

int jump_counts(const Path& path, const std::vector<int>& sites);

// --- Densities (log scale, unnormalized, w.r.t. the standard path measure) ---

// Tempered dependent-site log density. Returns -inf when the path does not hit
// the target endpoint; throws on ordering / self-substitution violations.
double log_density_dsm(const TemperedModelView& view, const Sequence& x, const Sequence& y,
                       const Path& path);

// Independent-site factorized log density; equals log_density_dsm at beta = 0.
double log_density_ism(const ContextModel& model, const Sequence& x, const Sequence& y,
                       const Path& path);

// Sum of the per-site density terms for sites in `subset` (sorted); the whole
// path contributes through shared context timelines. Summing over all sites
// recovers log_density_dsm. Assumes the path is valid for (x, y).
double log_density_sites(const TemperedModelView& view, const Sequence& x, const Sequence& y,
                         const Path& path, const std::vector<int>& subset);

// ISM log density of a block path against its endpoints (used for proposal
// density ratios; normalizing constants cancel between paths with the same
// endpoints).
double log_density_ism_block(const ContextModel& model, const Sequence& x, const Sequence& y,
                             const BlockPath& block, double horizon);

}  // namespace ctsmc

#endif
