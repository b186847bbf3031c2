#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace cforest {

/// RAPS regularization plus the set-construction switches. k_star = 0 and
/// lambda_star = 0 is plain APS.
struct RapsParams {
  int k_star = 0;
  double lambda_star = 0.0;
  bool randomized = true;
  bool allow_empty_sets = true;

  friend bool operator==(const RapsParams&, const RapsParams&) = default;
};

/// Throws InvalidRapsParams unless k_star in [0, n_classes] and lambda_star >= 0.
void validate(const RapsParams& params, int n_classes);

/// Probabilities in descending order. Ties keep the lower class index first.
struct SortedProbs {
  std::vector<double> sorted;
  /// perm[rank0] = original class index
  std::vector<int> perm;
  /// cumsum[r] = sorted[0] + ... + sorted[r], accumulated left to right
  std::vector<double> cumsum;
  /// rank_of[class] = 1-based rank
  std::vector<int> rank_of;

  std::size_t n_classes() const noexcept { return sorted.size(); }
};

/// Validates pi (non-negative, sums to 1 within 1e-6) and sorts it.
SortedProbs sort_probs(std::span<const double> pi);

/// Descending stable argsort into `order` (size == p.size()). No validation.
void argsort_descending(std::span<const double> p, std::span<int> order);

/// lambda * max(0, rank - k) for a 1-based rank.
inline double rank_penalty(int rank, int k_star, double lambda_star) noexcept {
  return rank > k_star ? lambda_star * static_cast<double>(rank - k_star) : 0.0;
}

/// Score at one rank: the cumulative mass above it, plus u times its own mass,
/// plus the penalty. Every score path (calibration, split sets, cross giqs)
/// evaluates exactly this expression so their results agree bit for bit.
inline double rank_score(double mass_above, double own_mass, double u, double penalty) noexcept {
  return (mass_above + u * own_mass) + penalty;
}

/// |y - y_hat|; throws NonFiniteInput.
double residual_score(double y, double y_hat);

/// Generalized inverse quantile: pi_(1) + ... + pi_(r-1) + u * pi_(r) where r is
/// the rank of y.
double aps_score(const SortedProbs& sp, int y, double u);

/// aps_score + lambda * max(0, r - k).
double raps_score(const SortedProbs& sp, int y, double u, const RapsParams& params);

}  // namespace cforest
