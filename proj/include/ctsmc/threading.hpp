#ifndef CTSMC_THREADING_HPP
#define CTSMC_THREADING_HPP

#include <cstddef>
#include <thread>
#include <vector>

namespace ctsmc {

// Static block partition over [begin, end). Each index is processed by exactly
// one worker and all output must go to per-index slots, so results do not
// depend on the worker count.
// Same partition, but hands each worker its whole [lo, hi) range.
template <typename Fn>
void parallel_chunks(std::size_t begin, std::size_t end, unsigned threads, Fn&& fn) {
  std::size_t count = end > begin ? end - begin : 0;
  if (count == 0) return;
  if (threads <= 1) {
    fn(begin, end);
    return;
  }
  unsigned workers = threads;
  if (workers > count) workers = static_cast<unsigned>(count);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::size_t chunk = (count + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    std::size_t lo = begin + static_cast<std::size_t>(w) * chunk;
    std::size_t hi = lo + chunk < end ? lo + chunk : end;
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn]() { fn(lo, hi); });
  }
  for (auto& t : pool) t.join();
}

template <typename Fn>
void parallel_for(std::size_t begin, std::size_t end, unsigned threads, Fn&& fn) {
  std::size_t count = end > begin ? end - begin : 0;
  if (count == 0) return;
  if (threads <= 1 || count == 1) {
    for (std::size_t i = begin; i < end; ++i) fn(i);
    return;
  }
  unsigned workers = threads;
  if (workers > count) workers = static_cast<unsigned>(count);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::size_t chunk = (count + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    std::size_t lo = begin + static_cast<std::size_t>(w) * chunk;
    std::size_t hi = lo + chunk < end ? lo + chunk : end;
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn]() {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace ctsmc

#endif
