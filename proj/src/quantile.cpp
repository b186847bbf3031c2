#include "cforest/quantile.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "cforest/error.hpp"

namespace cforest {

namespace {

void check_alpha(double alpha) {
  require(alpha > 0.0 && alpha < 1.0, ErrorCode::AlphaOutOfRange, "alpha must lie in (0, 1), got " + std::to_string(alpha));
}

// (1 - alpha)(n + 1) lands on an integer for many common alphas, but floating
// point can leave it a few ulps off. Snap those to the integer before rounding.
double snap(double x) {
  const double r = std::round(x);
  return std::abs(x - r) <= 1e-9 * std::max(1.0, std::abs(x)) ? r : x;
}

double kth_smallest(std::span<const double> values, std::size_t k) {
  std::vector<double> copy(values.begin(), values.end());
  auto nth = copy.begin() + static_cast<std::ptrdiff_t>(k - 1);
  std::nth_element(copy.begin(), nth, copy.end());
  return *nth;
}

}  // namespace

std::size_t upper_quantile_index(std::size_t n, double alpha) {
  check_alpha(alpha);
  return static_cast<std::size_t>(std::ceil(snap((1.0 - alpha) * static_cast<double>(n + 1))));
}

std::size_t lower_quantile_index(std::size_t n, double alpha) {
  check_alpha(alpha);
  return static_cast<std::size_t>(std::floor(snap(alpha * static_cast<double>(n + 1))));
}

double upper_quantile(std::span<const double> values, double alpha) {
  const std::size_t idx = upper_quantile_index(values.size(), alpha);
  require(!values.empty(), ErrorCode::EmptyInput, "quantile of an empty vector");
  if (idx > values.size()) return std::numeric_limits<double>::infinity();
  return kth_smallest(values, std::max<std::size_t>(idx, 1));
}

double lower_quantile(std::span<const double> values, double alpha) {
  const std::size_t idx = lower_quantile_index(values.size(), alpha);
  require(!values.empty(), ErrorCode::EmptyInput, "quantile of an empty vector");
  if (idx == 0) return -std::numeric_limits<double>::infinity();
  return kth_smallest(values, std::min(idx, values.size()));
}

double upper_quantile_sorted(std::span<const double> sorted, double alpha) {
  const std::size_t idx = upper_quantile_index(sorted.size(), alpha);
  require(!sorted.empty(), ErrorCode::EmptyInput, "quantile of an empty vector");
  if (idx > sorted.size()) return std::numeric_limits<double>::infinity();
  return sorted[std::max<std::size_t>(idx, 1) - 1];
}

double lower_quantile_sorted(std::span<const double> sorted, double alpha) {
  const std::size_t idx = lower_quantile_index(sorted.size(), alpha);
  require(!sorted.empty(), ErrorCode::EmptyInput, "quantile of an empty vector");
  if (idx == 0) return -std::numeric_limits<double>::infinity();
  return sorted[std::min(idx, sorted.size()) - 1];
}

double epsilon_cv_bound(std::size_t K, std::size_t n) {
  require(K >= 2 && K <= n, ErrorCode::InvalidKn,
          "need 2 <= K <= n, got K=" + std::to_string(K) + ", n=" + std::to_string(n));
  const double k = static_cast<double>(K);
  const double nn = static_cast<double>(n);
  const double first = 2.0 * (1.0 - 1.0 / k) / (nn / k + 1.0);
  const double second = (1.0 - k / nn) / (k + 1.0);
  return std::min(first, second);
}

}  // namespace cforest
