#include "cforest/scores.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "cforest/error.hpp"

namespace cforest {

void validate(const RapsParams& params, int n_classes) {
  require(params.k_star >= 0 && params.k_star <= n_classes, ErrorCode::InvalidRapsParams,
          "k_star " + std::to_string(params.k_star) + " outside [0, " + std::to_string(n_classes) + "]");
  require(params.lambda_star >= 0.0 && std::isfinite(params.lambda_star), ErrorCode::InvalidRapsParams,
          "lambda_star must be finite and >= 0");
}

void argsort_descending(std::span<const double> p, std::span<int> order) {
  const auto n = static_cast<int>(p.size());
  if (n <= 32) {
    // insertion sort: stable, fast for typical class counts
    for (int i = 0; i < n; ++i) {
      int j = i;
      while (j > 0 && p[static_cast<std::size_t>(order[static_cast<std::size_t>(j - 1)])] < p[static_cast<std::size_t>(i)]) {
        order[static_cast<std::size_t>(j)] = order[static_cast<std::size_t>(j - 1)];
        --j;
      }
      order[static_cast<std::size_t>(j)] = i;
    }
    return;
  }
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return p[static_cast<std::size_t>(a)] > p[static_cast<std::size_t>(b)]; });
}

SortedProbs sort_probs(std::span<const double> pi) {
  require(!pi.empty(), ErrorCode::NotAProbabilityVector, "empty probability vector");
  double total = 0.0;
  for (double v : pi) {
    require(std::isfinite(v) && v >= 0.0, ErrorCode::NotAProbabilityVector, "negative or non-finite probability");
    total += v;
  }
  require(std::abs(total - 1.0) <= 1e-6, ErrorCode::NotAProbabilityVector,
          "probabilities sum to " + std::to_string(total));

  const std::size_t c = pi.size();
  SortedProbs sp;
  sp.perm.resize(c);
  argsort_descending(pi, sp.perm);
  sp.sorted.resize(c);
  sp.cumsum.resize(c);
  sp.rank_of.resize(c);
  for (std::size_t r = 0; r < c; ++r) {
    const auto cls = static_cast<std::size_t>(sp.perm[r]);
    sp.sorted[r] = pi[cls];
    sp.cumsum[r] = r == 0 ? sp.sorted[0] : sp.cumsum[r - 1] + sp.sorted[r];
    sp.rank_of[cls] = static_cast<int>(r) + 1;
  }
  return sp;
}

double residual_score(double y, double y_hat) {
  require(std::isfinite(y) && std::isfinite(y_hat), ErrorCode::NonFiniteInput, "residual of non-finite values");
  return std::abs(y - y_hat);
}

namespace {

int checked_rank(const SortedProbs& sp, int y, double u) {
  require(y >= 0 && static_cast<std::size_t>(y) < sp.n_classes(), ErrorCode::ClassOutOfRange,
          "class " + std::to_string(y) + " out of range");
  require(u >= 0.0 && u <= 1.0, ErrorCode::UOutOfRange, "u must lie in [0, 1]");
  return sp.rank_of[static_cast<std::size_t>(y)];
}

double mass_above(const SortedProbs& sp, int rank) {
  return rank >= 2 ? sp.cumsum[static_cast<std::size_t>(rank - 2)] : 0.0;
}

}  // namespace

double aps_score(const SortedProbs& sp, int y, double u) {
  const int r = checked_rank(sp, y, u);
  return rank_score(mass_above(sp, r), sp.sorted[static_cast<std::size_t>(r - 1)], u, 0.0);
}

double raps_score(const SortedProbs& sp, int y, double u, const RapsParams& params) {
  const int r = checked_rank(sp, y, u);
  return rank_score(mass_above(sp, r), sp.sorted[static_cast<std::size_t>(r - 1)], u,
                    rank_penalty(r, params.k_star, params.lambda_star));
}

}  // namespace cforest
