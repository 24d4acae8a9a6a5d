#pragma once

// Reproducible random streams. Seeds for independent work items are derived
// from (master, stream, counter) with splitmix64, so results do not depend on
// which thread runs which item. Uniform doubles are built from the top 53 bits
// of mt19937_64 output, which is identical on every platform (unlike the
// standard distributions).

#include <cstdint>
#include <random>

namespace medcal {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t counter) {
  return splitmix64(splitmix64(splitmix64(master) ^ stream) ^ counter);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::uint64_t index(std::uint64_t n) { return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace medcal
