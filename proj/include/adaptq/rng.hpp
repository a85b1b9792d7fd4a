#pragma once

#include <cstdint>
#include <random>

namespace adaptq {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Deterministic uniform draw stream. Identical seeds produce identical
// sequences; parallel runs each derive their own stream from
// (master seed, run index) so results never depend on scheduling.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  static RngStream derive(std::uint64_t master_seed, std::uint64_t index) {
    return RngStream(splitmix64(master_seed + 0x9E3779B97F4A7C15ull * (index + 1)));
  }

  std::uint64_t seed() const { return seed_; }

  // Uniform double in [0, 1), built from the top 53 bits of one engine draw.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n); consumes exactly one draw.
  int uniform_int(int n) {
    const int v = static_cast<int>(uniform() * static_cast<double>(n));
    return v < n ? v : n - 1;
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace adaptq
