#ifndef CTSMC_RNG_HPP
#define CTSMC_RNG_HPP

#include <cstdint>

namespace ctsmc {

// Seedable counter-derived streams: every (seed, id...) tuple maps to an
// independent xoshiro256++ state via SplitMix64 mixing. Streams derived from
// the same tuple are bitwise identical regardless of thread schedule.
class Rng {
 public:
  Rng() : Rng(0) {}

  explicit Rng(uint64_t seed) {
    uint64_t sm = seed;
    for (auto& word : s_) word = splitmix64(sm);
  }

  // Derive a child stream; chain as many ids as needed, e.g.
  // Rng(seed).stream(particle).stream(stage).
  [[nodiscard]] Rng stream(uint64_t id) const {
    Rng child;
    uint64_t sm = s_[0] ^ (0x9e3779b97f4a7c15ULL + id);
    sm ^= s_[1] + 0xbf58476d1ce4e5b9ULL * (id + 1);
    child.s_[0] = splitmix64(sm);
    child.s_[1] = splitmix64(sm);
    child.s_[2] = splitmix64(sm);
    child.s_[3] = splitmix64(sm);
    return child;
  }

  uint64_t next_u64() {
    uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform on the open interval (0, 1); never returns 0 or 1.
  double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  // Uniform integer in [0, n).
  uint64_t uniform_index(uint64_t n) {
    // Lemire-style rejection to avoid modulo bias.
    uint64_t x = next_u64();
    __uint128_t m = static_cast<__uint128_t>(x) * n;
    auto lo = static_cast<uint64_t>(m);
    if (lo < n) {
      uint64_t t = (0 - n) % n;
      while (lo < t) {
        x = next_u64();
        m = static_cast<__uint128_t>(x) * n;
        lo = static_cast<uint64_t>(m);
      }
    }
    return static_cast<uint64_t>(m >> 64);
  }

 private:
  static uint64_t splitmix64(uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  uint64_t s_[4] = {};
};

}  // namespace ctsmc

#endif
