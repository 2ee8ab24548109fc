#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace mtd {

/// Deterministic random source. Wraps std::mt19937_64 but implements the
/// uniform draws itself: std::uniform_*_distribution is implementation
/// defined, and run artifacts must be reproducible bit-for-bit across
/// standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0,1) with 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  float uniform_float() { return static_cast<float>(uniform()); }

  /// Uniform integer in [0,n), unbiased via rejection sampling.
  int uniform_int(int n) {
    if (n <= 0) return 0;
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return static_cast<int>(x % bound);
  }

  /// Fisher-Yates shuffle under this source.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(
          uniform_int(static_cast<int>(i)));
      std::swap(v[i - 1], v[j]);
    }
  }

  /// Derives an independent stream seed (splitmix64 of seed ^ stream tag),
  /// used to give parallel jobs schedule-independent randomness.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace mtd
