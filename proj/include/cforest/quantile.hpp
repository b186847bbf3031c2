#pragma once

#include <cstddef>
#include <span>

namespace cforest {

/// 1-based order-statistic index ceil((1 - alpha)(n + 1)); may exceed n.
std::size_t upper_quantile_index(std::size_t n, double alpha);

/// 1-based order-statistic index floor(alpha (n + 1)); may be 0.
std::size_t lower_quantile_index(std::size_t n, double alpha);

/// The ceil((1 - alpha)(n + 1))-th smallest value, or +inf when that index
/// exceeds n. The unbounded result is deliberate: clamping would void the
/// coverage guarantee for small calibration sets.
double upper_quantile(std::span<const double> values, double alpha);

/// The floor(alpha (n + 1))-th smallest value, or -inf when the index is 0.
double lower_quantile(std::span<const double> values, double alpha);

/// Same as above for input already sorted ascending (no copy).
double upper_quantile_sorted(std::span<const double> sorted, double alpha);
double lower_quantile_sorted(std::span<const double> sorted, double alpha);

/// CV+ slack: min{ 2(1 - 1/K) / (n/K + 1), (1 - K/n) / (K + 1) }, 2 <= K <= n.
/// The CV+ coverage floor is 1 - 2 alpha - epsilon_cv_bound(K, n).
double epsilon_cv_bound(std::size_t K, std::size_t n);

}  // namespace cforest
