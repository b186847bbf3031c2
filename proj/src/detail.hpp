#pragma once

#include <cmath>
#include <span>
#include <string>

#include "cforest/error.hpp"

namespace cforest::detail {

inline bool is_probability_vector(std::span<const double> p) {
  if (p.empty()) return false;
  double total = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) return false;
    total += v;
  }
  return std::abs(total - 1.0) <= 1e-6;
}

inline void check_u(std::span<const double> u, std::size_t expected) {
  require(u.size() == expected, ErrorCode::DimensionMismatch,
          "u has " + std::to_string(u.size()) + " entries, expected " + std::to_string(expected));
  for (double v : u) require(v >= 0.0 && v <= 1.0, ErrorCode::UOutOfRange, "u must lie in [0, 1]");
}

}  // namespace cforest::detail
