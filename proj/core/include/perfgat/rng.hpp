#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace perfgat {

// Derives an independent stream seed from (seed, stream) via splitmix64.
// Used to give subjects, epochs and initialization their own generators so
// that reordering one stage never perturbs another.
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Named streams hung off a run seed.
namespace rng_stream {
inline constexpr std::uint64_t kCentroids = 1;
inline constexpr std::uint64_t kLabels = 2;
inline constexpr std::uint64_t kSubjectBase = 1000;
inline constexpr std::uint64_t kInit = 3;
inline constexpr std::uint64_t kSplit = 4;
inline constexpr std::uint64_t kAugment = 5;
inline constexpr std::uint64_t kRetrainInit = 6;
inline constexpr std::uint64_t kEpochBase = 100000;
}  // namespace rng_stream

// Deterministic RNG. The engine (mt19937_64) is fully specified by the
// standard and all derived draws below are computed with explicit arithmetic,
// so identical seeds give identical sequences on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller (uncached).
  double normal() {
    const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  // Index in [0, n). Modulo bias is irrelevant at the sizes used here.
  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(next_u64() % static_cast<std::uint64_t>(n));
  }

  // Fisher-Yates.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[index(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace perfgat
