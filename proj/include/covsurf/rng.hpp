#pragma once

// Deterministic random streams. Every stochastic step in the library draws
// from an Rng seeded through derive_seed(master, tags...), so results are
// reproducible bit-for-bit regardless of thread count or evaluation order.
// std::random distributions are implementation-defined and therefore avoided;
// only the mt19937_64 engine (whose output sequence is standardized) is used.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <utility>
#include <vector>

namespace covsurf {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  return splitmix64(seed ^ splitmix64(tag + 0x517cc1b727220a95ULL));
}

template <class... Rest>
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag, std::uint64_t tag2,
                          Rest... rest) {
  return derive_seed(derive_seed(seed, tag), tag2, rest...);
}

// Stream tags. One constant per independent randomness consumer; combined with
// loop indices via derive_seed so streams never collide.
namespace stream {
inline constexpr std::uint64_t kTree = 1;
inline constexpr std::uint64_t kPermutation = 2;
inline constexpr std::uint64_t kViForestTrain = 11;
inline constexpr std::uint64_t kViForestImportance = 12;
inline constexpr std::uint64_t kNestedModel = 13;
inline constexpr std::uint64_t kPredictionStep = 14;
inline constexpr std::uint64_t kSweep = 21;
inline constexpr std::uint64_t kFinalForest = 22;
inline constexpr std::uint64_t kVsurf = 23;
inline constexpr std::uint64_t kLoocvFold = 24;
inline constexpr std::uint64_t kCompareArm = 25;
inline constexpr std::uint64_t kBenchTestSet = 31;
inline constexpr std::uint64_t kBenchDataset = 32;
}  // namespace stream

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform integer in [0, bound), bound >= 1. Lemire multiply-shift with
  // rejection, exact and portable.
  std::uint64_t below(std::uint64_t bound) {
    unsigned __int128 m = static_cast<unsigned __int128>(next()) * bound;
    auto lo = static_cast<std::uint64_t>(m);
    if (lo < bound) {
      const std::uint64_t t = (0 - bound) % bound;
      while (lo < t) {
        m = static_cast<unsigned __int128>(next()) * bound;
        lo = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Standard normal pair via Box-Muller.
  std::pair<double, double> normal_pair() {
    const double u1 = 1.0 - uniform01();  // (0, 1]
    const double u2 = uniform01();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    return {radius * std::cos(angle), radius * std::sin(angle)};
  }

  template <class T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::swap(values[i - 1], values[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

// Draws k distinct indices from {0,...,pool.size()-1} by partial Fisher-Yates
// over a caller-owned pool (kept permuted between calls; still uniform).
// The drawn prefix is sorted ascending so downstream tie-breaking rules are
// independent of draw order.
inline void sample_indices(std::vector<int>& pool, std::size_t k, Rng& rng,
                           std::vector<int>& out) {
  out.clear();
  for (std::size_t i = 0; i < k && i < pool.size(); ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
    std::swap(pool[i], pool[j]);
    out.push_back(pool[i]);
  }
  std::sort(out.begin(), out.end());
}

}  // namespace covsurf
