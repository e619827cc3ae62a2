#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace stnp {

// splitmix64 stream with explicit distribution transforms. std::mt19937_64
// would do, but the standard leaves normal_distribution implementation
// defined; seeded streams here must be bit-identical across toolchains
// because golden task fixtures are checked into the repo.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // uniform on [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller; consumes two draws, no caching so stream position stays
  // a pure function of the call count.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  double gumbel() {
    double u = uniform();
    if (u <= 0.0) u = 0x1.0p-53;
    return -std::log(-std::log(u) + 1e-300);
  }

  // index in [0, n)
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

 private:
  std::uint64_t state_;
};

inline std::uint64_t hash_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t hash_seed(std::uint64_t a, std::uint64_t b,
                               std::uint64_t c) {
  return hash_seed(hash_seed(a, b), c);
}

// Independent derived stream; tag/index pairs keep sub-draws (gumbel noise,
// RFF weights, task indices) on separate streams.
inline Rng derive_rng(std::uint64_t base, std::uint64_t tag,
                      std::uint64_t index = 0) {
  return Rng(hash_seed(base, tag, index));
}

}  // namespace stnp
