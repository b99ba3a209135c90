#pragma once

#include <cstdint>
#include <random>

namespace ccgym {

/// Named sub-streams split from a run seed. The order is fixed: changing it
/// changes every seeded run.
enum class RngStream : std::uint64_t { kEnv = 1, kAgent = 2, kNoise = 3 };

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(splitmix64(seed)) {}
  Rng(std::uint64_t seed, RngStream stream)
      : engine_(splitmix64(splitmix64(seed) ^ static_cast<std::uint64_t>(stream))) {}

  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  double normal() { return normal_(engine_); }
  /// Uniform index in [0, n).
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace ccgym
