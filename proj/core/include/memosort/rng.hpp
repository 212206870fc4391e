#pragma once

#include <cmath>
#include <cstdint>

namespace memosort {

// Deterministic generator used everywhere randomness is needed (scenario
// synthesis, weight init, data shuffling). SplitMix64 core with explicit
// distribution transforms, so a sequence is reproducible from the seed and
// the documented draw order alone:
//
//   next():       state += 0x9E3779B97F4A7C15
//                 z = state
//                 z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//                 z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//                 return z ^ (z >> 31)
//   uniform():    (next() >> 11) * 2^-53, in [0, 1)
//   normal():     Box-Muller on two fresh uniforms, no caching:
//                 u1 = 1 - uniform(), u2 = uniform()
//                 return sqrt(-2 ln u1) * cos(2 pi u2)
//   uniform_int:  next() % n
//
// Every call consumes a fixed number of core draws (normal() consumes two),
// so draw order never depends on the values produced.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    state_ += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform on [0, 1).
  double uniform() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform();
  }

  // Standard normal via Box-Muller; consumes exactly two core draws.
  double normal() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.141592653589793238462643383279502884 * u2);
  }

  double normal(double mean, double stddev) {
    return mean + stddev * normal();
  }

  // Uniform integer in [0, n). Modulo bias is irrelevant at the n used here.
  int uniform_int(int n) {
    return static_cast<int>(next() % static_cast<std::uint64_t>(n));
  }

 private:
  std::uint64_t state_;
};

}  // namespace memosort
