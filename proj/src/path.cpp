#include "ctsmc/path.hpp"

#include <cmath>

namespace ctsmc {

std::string ValidationResult::describe() const {
  switch (violation) {
    case PathViolation::none: return "ok";
    case PathViolation::x0_mismatch: return "path start sequence differs from x";
    case PathViolation::time_out_of_range:
      return "event " + std::to_string(event_index) + " outside (0, T)";
    case PathViolation::ordering:
      return "event " + std::to_string(event_index) + " violates strict time ordering";
    case PathViolation::self_substitution:
      return "event " + std::to_string(event_index) + " does not change the state";
    case PathViolation::endpoint_mismatch: return "terminal sequence differs from y";
  }
  return "unknown";
}

ValidationResult validate(const Path& path, const Sequence& x, const Sequence& y) {
  if (!(path.x0 == x)) return {PathViolation::x0_mismatch, -1};
  Sequence state = x;
  double prev = 0.0;
  for (int j = 0; j < path.m(); ++j) {
    const Event& e = path.events[static_cast<size_t>(j)];
    if (!(e.t > 0.0) || !(e.t < path.horizon)) return {PathViolation::time_out_of_range, j};
    if (!(e.t > prev)) return {PathViolation::ordering, j};
    prev = e.t;
    if (e.site < 0 || e.site >= state.size()) return {PathViolation::time_out_of_range, j};
    if (state.sym[static_cast<size_t>(e.site)] == e.to) return {PathViolation::self_substitution, j};
    state.sym[static_cast<size_t>(e.site)] = e.to;
  }
  if (!(state == y)) return {PathViolation::endpoint_mismatch, -1};
  return {};
}

BlockPath project(const Path& path, const std::vector<int>& sites) {
  BlockPath block;
  block.sites = sites;
  std::sort(block.sites.begin(), block.sites.end());
  for (const auto& e : path.events)
    if (std::binary_search(block.sites.begin(), block.sites.end(), e.site))
      block.events.push_back(e);
  return block;
}

SitePath project_site(const Path& path, int site) {
  SitePath sp;
  for (const auto& e : path.events)
    if (e.site == site) sp.events.emplace_back(e.t, e.to);
  return sp;
}

std::optional<Path> merge(const Path& path, const std::vector<int>& sites, const BlockPath& block) {
  std::vector<int> sorted = sites;
  std::sort(sorted.begin(), sorted.end());
  Path out;
  out.horizon = path.horizon;
  out.x0 = path.x0;
  out.events.reserve(path.events.size() + block.events.size());
  for (const auto& e : path.events)
    if (!std::binary_search(sorted.begin(), sorted.end(), e.site)) out.events.push_back(e);
  for (const auto& e : block.events) {
    if (!std::binary_search(sorted.begin(), sorted.end(), e.site))
      throw ValidationError("block event outside the replaced site set");
    out.events.push_back(e);
  }
  std::stable_sort(out.events.begin(), out.events.end(),
                   [](const Event& a, const Event& b) { return a.t < b.t; });
  for (size_t j = 1; j < out.events.size(); ++j)
    if (out.events[j].t == out.events[j - 1].t) return std::nullopt;
  return out;
}

int jump_counts(const Path& path, const std::vector<int>& sites) {
  std::vector<int> sorted = sites;
  std::sort(sorted.begin(), sorted.end());
  int count = 0;
  for (const auto& e : path.events)
    if (std::binary_search(sorted.begin(), sorted.end(), e.site)) ++count;
  return count;
}

namespace {

void require_valid(const Path& path, const Sequence& x, const Sequence& y, bool* endpoint_bad) {
  auto v = validate(path, x, y);
  *endpoint_bad = false;
  if (v.ok()) return;
  if (v.violation == PathViolation::endpoint_mismatch) {
    *endpoint_bad = true;
    return;
  }
  throw ValidationError("invalid path: " + v.describe());
}

}  // namespace

double log_density_dsm(const TemperedModelView& view, const Sequence& x, const Sequence& y,
                       const Path& path) {
  bool endpoint_bad = false;
  require_valid(path, x, y, &endpoint_bad);
  if (endpoint_bad) return kNegInf;

  const int n = x.size();
  std::vector<uint8_t> state = x.sym;
  double logp = 0.0;
  double total_exit = total_rate(view, state.data(), n);
  double prev_t = 0.0;
  for (const auto& e : path.events) {
    logp -= (e.t - prev_t) * total_exit;
    logp += std::log(site_rate(view, state.data(), n, e.site, e.to));
    prev_t = e.t;
    // Only sites whose context contains e.site change their exit rate.
    auto affected = view.model->context_sites(e.site, n);
    for (int i : affected) total_exit -= exit_rate(view, state.data(), n, i);
    state[static_cast<size_t>(e.site)] = e.to;
    for (int i : affected) total_exit += exit_rate(view, state.data(), n, i);
  }
  logp -= (path.horizon - prev_t) * total_exit;
  return logp;
}

double log_density_ism(const ContextModel& model, const Sequence& x, const Sequence& y,
                       const Path& path) {
  bool endpoint_bad = false;
  require_valid(path, x, y, &endpoint_bad);
  if (endpoint_bad) return kNegInf;

  double logp = 0.0;
  const int n = x.size();
  // Factorized: each site only sees its own events.
  std::vector<double> prev_t(static_cast<size_t>(n), 0.0);
  std::vector<uint8_t> state = x.sym;
  std::vector<double> exit(static_cast<size_t>(n));
  auto site_exit = [&](int i) {
    double s = 0.0;
    for (uint8_t b = 0; b < model.a(); ++b)
      if (b != state[static_cast<size_t>(i)]) s += model.base_rate(i, state[static_cast<size_t>(i)], b);
    return s;
  };
  for (int i = 0; i < n; ++i) exit[static_cast<size_t>(i)] = site_exit(i);
  for (const auto& e : path.events) {
    auto i = static_cast<size_t>(e.site);
    logp -= (e.t - prev_t[i]) * exit[i];
    logp += std::log(model.base_rate(e.site, state[i], e.to));
    prev_t[i] = e.t;
    state[i] = e.to;
    exit[i] = site_exit(e.site);
  }
  for (int i = 0; i < n; ++i)
    logp -= (path.horizon - prev_t[static_cast<size_t>(i)]) * exit[static_cast<size_t>(i)];
  return logp;
}

double log_density_sites(const TemperedModelView& view, const Sequence& x, const Sequence& y,
                         const Path& path, const std::vector<int>& subset) {
  const int n = x.size();
  std::vector<char> in_subset(static_cast<size_t>(n), 0);
  for (int i : subset) in_subset[static_cast<size_t>(i)] = 1;

  std::vector<uint8_t> state = x.sym;
  double logp = 0.0;
  double exit_subset = 0.0;
  for (int i : subset) exit_subset += exit_rate(view, state.data(), n, i);
  double prev_t = 0.0;
  for (const auto& e : path.events) {
    logp -= (e.t - prev_t) * exit_subset;
    if (in_subset[static_cast<size_t>(e.site)])
      logp += std::log(site_rate(view, state.data(), n, e.site, e.to));
    prev_t = e.t;
    auto affected = view.model->context_sites(e.site, n);
    for (int i : affected)
      if (in_subset[static_cast<size_t>(i)]) exit_subset -= exit_rate(view, state.data(), n, i);
    state[static_cast<size_t>(e.site)] = e.to;
    for (int i : affected)
      if (in_subset[static_cast<size_t>(i)]) exit_subset += exit_rate(view, state.data(), n, i);
  }
  logp -= (path.horizon - prev_t) * exit_subset;
  (void)y;
  return logp;
}

double log_density_ism_block(const ContextModel& model, const Sequence& x, const Sequence& y,
                             const BlockPath& block, double horizon) {
  (void)y;
  const int n = x.size();
  double logp = 0.0;
  std::vector<uint8_t> state = x.sym;
  std::vector<double> prev_t(static_cast<size_t>(n), 0.0);
  auto site_exit = [&](int i) {
    double s = 0.0;
    for (uint8_t b = 0; b < model.a(); ++b)
      if (b != state[static_cast<size_t>(i)]) s += model.base_rate(i, state[static_cast<size_t>(i)], b);
    return s;
  };
  for (const auto& e : block.events) {
    auto i = static_cast<size_t>(e.site);
    logp -= (e.t - prev_t[i]) * site_exit(e.site);
    logp += std::log(model.base_rate(e.site, state[i], e.to));
    prev_t[i] = e.t;
    state[i] = e.to;
  }
  for (int i : block.sites)
    logp -= (horizon - prev_t[static_cast<size_t>(i)]) * site_exit(i);
  return logp;
}

}  // namespace ctsmc
