#include "ctsmc/partition.hpp"

#include <algorithm>
#include <functional>
#include <set>

namespace ctsmc {

namespace {

std::vector<std::vector<int>> mutation_components(const ContextModel& model, const Sequence& x,
                                                  const Sequence& y) {
  std::vector<int> s = mutated_sites(x, y);
  int n = x.size();
  std::vector<std::vector<int>> comps;
  if (s.empty()) return comps;

  std::vector<std::vector<int>> ctx;
  ctx.reserve(s.size());
  for (int i : s) ctx.push_back(model.context_sites(i, n));

  std::vector<int> root(s.size());
  for (size_t i = 0; i < s.size(); ++i) root[i] = static_cast<int>(i);
  std::function<int(int)> find = [&](int v) { return root[static_cast<size_t>(v)] == v ? v : root[static_cast<size_t>(v)] = find(root[static_cast<size_t>(v)]); };
  auto overlap = [](const std::vector<int>& a, const std::vector<int>& b) {
    size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
      if (a[i] == b[j]) return true;
      a[i] < b[j] ? ++i : ++j;
    }
    return false;
  };
  for (size_t i = 0; i < s.size(); ++i)
    for (size_t j = i + 1; j < s.size(); ++j)
      if (overlap(ctx[i], ctx[j])) root[static_cast<size_t>(find(static_cast<int>(i)))] = find(static_cast<int>(j));

  std::vector<std::vector<int>> by_root(s.size());
  for (size_t i = 0; i < s.size(); ++i) by_root[static_cast<size_t>(find(static_cast<int>(i)))].push_back(s[i]);
  for (auto& c : by_root)
    if (!c.empty()) {
      std::sort(c.begin(), c.end());
      comps.push_back(std::move(c));
    }
  std::sort(comps.begin(), comps.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return comps;
}

void fill_division(const ContextModel& model, const Sequence& x, const Sequence& y,
                   IslandPartition& part) {
  int n = x.size();
  part.division.assign(static_cast<size_t>(part.B()), {});
  part.boundary.assign(static_cast<size_t>(part.B()), {});
  part.r_block.assign(static_cast<size_t>(part.B()), 0);
  for (int j = 0; j < part.B(); ++j) {
    auto [lo, hi] = part.blocks[static_cast<size_t>(j)];
    std::set<int> division;
    for (int i = lo; i <= hi; ++i) {
      if (x[i] != y[i]) ++part.r_block[static_cast<size_t>(j)];
      for (int c : model.context_sites(i, n))
        if (c < lo || c > hi) {
          division.insert(i);
          break;
        }
    }
    std::set<int> boundary;
    for (int i : division)
      for (int c : model.context_sites(i, n))
        if (c >= lo && c <= hi && !division.count(c)) boundary.insert(c);
    part.division[static_cast<size_t>(j)].assign(division.begin(), division.end());
    part.boundary[static_cast<size_t>(j)].assign(boundary.begin(), boundary.end());
  }
}

// A cut after site c is valid when no mutated site's context crosses it.
bool cut_separates(const ContextModel& model, const Sequence& x, const Sequence& y, int c,
                   int left_max, int right_min) {
  if (c < left_max || c >= right_min) return false;
  int n = x.size();
  // Mutated sites near this corridor must not become division sites.
  for (int i = std::max(0, left_max); i <= std::min(n - 1, right_min); ++i) {
    if (x[i] == y[i]) continue;
    for (int s : model.context_sites(i, n)) {
      bool crosses = (i <= c && s > c) || (i > c && s <= c);
      if (crosses) return false;
    }
  }
  return true;
}

}  // namespace

int r_star(const ContextModel& model, const Sequence& x, const Sequence& y) {
  model.check_length(x.size());
  auto comps = mutation_components(model, x, y);
  size_t best = 0;
  for (const auto& c : comps) best = std::max(best, c.size());
  return static_cast<int>(best);
}

IslandPartition single_block_partition(const ContextModel& model, const Sequence& x,
                                       const Sequence& y) {
  IslandPartition part;
  part.blocks.emplace_back(0, x.size() - 1);
  part.r_star = r_star(model, x, y);
  // A single block has no division sites, so the island property holds vacuously.
  part.island = true;
  fill_division(model, x, y, part);
  return part;
}

IslandPartition partition_from_blocks(const ContextModel& model, const Sequence& x,
                                      const Sequence& y,
                                      const std::vector<std::pair<int, int>>& blocks) {
  if (blocks.empty()) throw ValidationError("partition needs at least one block");
  int expect = 0;
  for (auto [lo, hi] : blocks) {
    if (lo != expect || hi < lo) throw ValidationError("blocks must be contiguous and ordered");
    expect = hi + 1;
  }
  if (expect != x.size()) throw ValidationError("blocks must cover all sites");
  IslandPartition part;
  part.blocks = blocks;
  part.r_star = r_star(model, x, y);
  fill_division(model, x, y, part);
  part.island = true;
  for (const auto& d : part.division)
    for (int i : d)
      if (x[i] != y[i]) part.island = false;
  return part;
}

PartitionResult build_island_partition(const ContextModel& model, const Sequence& x,
                                       const Sequence& y) {
  model.check_length(x.size());
  if (x.size() != y.size()) throw ValidationError("sequences differ in length");
  int n = x.size();

  auto comps = mutation_components(model, x, y);
  PartitionResult out;
  if (comps.size() <= 1) {
    out.partition = single_block_partition(model, x, y);
    return out;
  }

  // One cut per corridor between consecutive mutation components.
  std::vector<int> cuts;
  for (size_t g = 0; g + 1 < comps.size(); ++g) {
    int left_max = comps[g].back();
    int right_min = comps[g + 1].front();
    int lo = -1, hi = -1;
    for (int c = left_max; c < right_min; ++c) {
      if (cut_separates(model, x, y, c, left_max, right_min)) {
        if (lo < 0) lo = c;
        hi = c;
      }
    }
    if (lo < 0) {
      out.infeasible_reason = "mutation components at sites " + std::to_string(left_max + 1) +
                              " and " + std::to_string(right_min + 1) +
                              " leave no unmutated division corridor";
      return out;
    }
    int c;
    if (g == 0) {
      c = lo;  // first cut hugs the first island
    } else if (g + 2 == comps.size()) {
      c = hi;  // last cut hugs the last island
    } else {
      c = (lo + hi) / 2;
    }
    cuts.push_back(c);
  }

  IslandPartition part;
  int lo = 0;
  for (int c : cuts) {
    part.blocks.emplace_back(lo, c);
    lo = c + 1;
  }
  part.blocks.emplace_back(lo, n - 1);
  part.r_star = r_star(model, x, y);
  part.island = true;
  fill_division(model, x, y, part);

  for (int j = 0; j < part.B(); ++j)
    for (int i : part.division[static_cast<size_t>(j)])
      if (x[i] != y[i]) throw std::logic_error("island partition produced a mutated division site");

  out.partition = std::move(part);
  return out;
}

}  // namespace ctsmc
