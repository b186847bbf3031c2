#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace cforest {

// Every random quantity is drawn from a stream keyed by (seed, purpose, index),
// so results never depend on thread scheduling.
enum class Stream : std::uint64_t {
  TreeBootstrap = 1,
  FoldShuffle = 2,
  FoldForest = 3,
  Calibration = 4,
  Test = 5,
  BinomialDraw = 6,
  TuningSplit = 7,
  CalibSplit = 8,
  Synthetic = 9,
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Seed derived from (seed, stream, index). Distinct keys give unrelated seeds.
std::uint64_t derive_seed(std::uint64_t seed, Stream stream, std::uint64_t index) noexcept;

/// Counter-based uniform in [0, 1): a pure function of its key.
double counter_uniform(std::uint64_t seed, Stream stream, std::uint64_t index) noexcept;

/// u vector for samples [0, n): counter_uniform keyed by sample index.
std::vector<double> uniform_vector(std::uint64_t seed, Stream stream, std::size_t n);

/// Seeded engine for sequential draws inside one work item.
using Engine = std::mt19937_64;

inline Engine make_engine(std::uint64_t seed, Stream stream, std::uint64_t index) {
  return Engine(derive_seed(seed, stream, index));
}

/// Unbiased integer in [0, bound) (bound >= 1). Platform-independent, unlike
/// std::uniform_int_distribution.
std::uint64_t uniform_index(Engine& eng, std::uint64_t bound);

/// Uniform double in [0, 1) from 53 random bits.
inline double uniform01(Engine& eng) { return static_cast<double>(eng() >> 11) * 0x1.0p-53; }

/// Standard normal via Box-Muller (one value per call).
double standard_normal(Engine& eng);

/// In-place Fisher-Yates.
template <typename T>
void shuffle(std::vector<T>& v, Engine& eng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = uniform_index(eng, i);
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace cforest
