#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

namespace tamatch {

// splitmix64 finalizer; also usable as a standalone mixing step.
inline std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

// Stream tags keeping independent parts of a run on disjoint streams.
namespace rng_tag {
inline constexpr std::uint64_t kBiasSim = 0x01;
inline constexpr std::uint64_t kDataset = 0x02;
inline constexpr std::uint64_t kTrain = 0x03;
inline constexpr std::uint64_t kEntropy = 0x04;
}  // namespace rng_tag

// Splittable deterministic generator: a xoshiro256++ engine whose state is
// derived by hashing (master seed, stream key words). Two streams with
// different keys are statistically independent, and results never depend on
// which thread ran which stream. Distributions are implemented explicitly
// (no std::uniform_real_distribution etc.) so the byte stream of results is
// identical on every standard library.
class SplitRng {
 public:
  SplitRng(std::uint64_t master, std::initializer_list<std::uint64_t> stream) {
    std::uint64_t h = mix64(master + 0x9e3779b97f4a7c15ULL);
    for (std::uint64_t w : stream) {
      h = mix64(h ^ (w + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)));
    }
    std::uint64_t sm = h;
    for (auto& word : state_) {
      sm += 0x9e3779b97f4a7c15ULL;
      word = mix64(sm);
    }
    if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = 1;
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0, 1) with 53 random bits.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  bool next_bernoulli(double p) { return next_unit() < p; }

  // Unbiased integer in [0, bound); Lemire's multiply-shift with rejection.
  std::uint64_t next_below(std::uint64_t bound) {
    unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * bound;
    auto lo = static_cast<std::uint64_t>(m);
    if (lo < bound) {
      const std::uint64_t threshold = (0 - bound) % bound;
      while (lo < threshold) {
        m = static_cast<unsigned __int128>(next_u64()) * bound;
        lo = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  // Standard normal via Box-Muller. Consumes exactly two uniforms per call
  // (no cached spare) so stream consumption stays easy to reason about.
  double next_normal() {
    const double u1 = 1.0 - next_unit();  // (0, 1]
    const double u2 = next_unit();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::array<std::uint64_t, 4> state_;
};

}  // namespace tamatch
