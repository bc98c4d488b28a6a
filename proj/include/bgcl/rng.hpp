#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace bgcl {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// One logical random stream. The uniform/normal transforms are pinned here
// (not taken from std:: distributions, whose output is implementation
// defined) so that artifacts are byte-reproducible for a given seed.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // uniform in [2^-53, 1 - 2^-53] ⊂ (0,1)
  double uniform() {
    const double u = (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    return u;
  }

  // Box-Muller, cache-free: two uniforms per draw.
  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  // unbiased integer in [0, n)
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t id) {
  return splitmix64(splitmix64(master) ^ splitmix64(id));
}

// Counter-based splitting: every logical task derives its own stream from
// the master seed and a path of indices, independent of evaluation order.
class RngSplitter {
 public:
  explicit RngSplitter(std::uint64_t master) : master_(master) {}

  RngStream stream(std::initializer_list<std::uint64_t> path) const {
    std::uint64_t s = splitmix64(master_ ^ 0x5851f42d4c957f2dULL);
    for (std::uint64_t id : path) s = splitmix64(s ^ splitmix64(id));
    return RngStream(s);
  }

  std::uint64_t master() const { return master_; }

 private:
  std::uint64_t master_;
};

}  // namespace bgcl
