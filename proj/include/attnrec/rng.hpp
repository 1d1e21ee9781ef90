#pragma once

#include <cstdint>
#include <random>
#include <utility>

namespace attnrec {

// SplitMix64 finalizer, used to derive independent seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Explicit, seedable random state. Callers own one per thread; nothing in the
// library touches global randomness.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(mix_seed(seed)) {}

  // Independent stream keyed by (seed, stream), stable across platforms.
  static Rng stream(std::uint64_t seed, std::uint64_t stream) {
    return Rng(mix_seed(seed) ^ mix_seed(stream + 0x632be59bd9b4e019ULL));
  }

  std::uint64_t next() { return engine_(); }

  // Child generator; advances this one by a single draw.
  Rng split() { return Rng(next()); }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n), unbiased (rejection on the top range).
  std::uint64_t index(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = next();
    } while (x >= limit);
    return x % n;
  }

  double normal() { return normal_(engine_); }

  // Fisher-Yates with this generator's index(); std::shuffle's draw sequence
  // is implementation-defined.
  template <class It>
  void shuffle(It first, It last) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
      std::swap(first[i - 1], first[index(i)]);
    }
  }

  double gamma(double shape) {
    std::gamma_distribution<double> dist(shape, 1.0);
    return dist(engine_);
  }

  using result_type = std::uint64_t;
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return UINT64_MAX; }
  result_type operator()() { return next(); }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace attnrec
