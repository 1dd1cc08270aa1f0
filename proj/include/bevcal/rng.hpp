#pragma once

#include <cstdint>
#include <random>

namespace bevcal {

// Seeded generator whose derived draws are identical across standard
// libraries (the std distributions are implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Independent stream for a (seed, index) pair.
  static Rng stream(std::uint64_t seed, std::uint64_t index);

  std::uint64_t next() { return engine_(); }
  // Uniform on [0, 1).
  double uniform() { return double(engine_() >> 11U) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform on {0, ..., n-1}; n > 0.
  std::uint64_t below(std::uint64_t n);
  double normal();
  // Knuth multiplication method, adequate for the small means used here.
  int poisson(double mean);

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace bevcal
