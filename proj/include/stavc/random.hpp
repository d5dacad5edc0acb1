#pragma once

#include <cmath>
#include <cstdint>

namespace stavc {

// Explicit, seedable random source (splitmix64 core). No global RNG anywhere
// in the library; every stochastic component takes one of these. The mapping
// from raw bits to doubles is spelled out here so streams do not depend on
// the standard library's distribution implementations.
class RandomSource {
 public:
  explicit RandomSource(uint64_t seed = 0) : state_(seed), has_spare_(false), spare_(0.0) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [lo, hi] inclusive.
  int64_t uniform_int(int64_t lo, int64_t hi) {
    uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    return lo + static_cast<int64_t>(next_u64() % span);
  }

  // Standard normal via Box-Muller (cached spare).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Deterministically derive an independent child stream.
  RandomSource fork(uint64_t stream_id) {
    uint64_t z = state_ ^ (0x9e3779b97f4a7c15ull * (stream_id + 1));
    RandomSource child(z);
    child.next_u64();
    return child;
  }

 private:
  uint64_t state_;
  bool has_spare_;
  double spare_;
};

}  // namespace stavc
