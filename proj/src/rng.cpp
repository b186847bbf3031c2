#include "cforest/rng.hpp"

#include <cmath>
#include <numbers>

namespace cforest {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, Stream stream, std::uint64_t index) noexcept {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ static_cast<std::uint64_t>(stream));
  return splitmix64(h ^ index);
}

double counter_uniform(std::uint64_t seed, Stream stream, std::uint64_t index) noexcept {
  return static_cast<double>(derive_seed(seed, stream, index) >> 11) * 0x1.0p-53;
}

std::vector<double> uniform_vector(std::uint64_t seed, Stream stream, std::size_t n) {
  std::vector<double> u(n);
  for (std::size_t i = 0; i < n; ++i) u[i] = counter_uniform(seed, stream, i);
  return u;
}

std::uint64_t uniform_index(Engine& eng, std::uint64_t bound) {
  // rejection on the top of the range
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t x;
  do {
    x = eng();
  } while (x >= limit);
  return x % bound;
}

double standard_normal(Engine& eng) {
  double u1;
  do {
    u1 = uniform01(eng);
  } while (u1 <= 0.0);
  const double u2 = uniform01(eng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace cforest
