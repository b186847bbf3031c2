#include "cforest/reference.hpp"

#include <string>
#include <vector>

#include "cforest/error.hpp"
#include "detail.hpp"

namespace cforest::reference {

namespace {

// Selection order: repeatedly take the largest remaining probability, lowest
// class index on ties.
std::vector<std::size_t> rank_order(std::span<const double> p) {
  std::vector<std::size_t> order;
  std::vector<bool> taken(p.size(), false);
  for (std::size_t r = 0; r < p.size(); ++r) {
    std::size_t best = p.size();
    for (std::size_t c = 0; c < p.size(); ++c) {
      if (taken[c]) continue;
      if (best == p.size() || p[c] > p[best]) best = c;
    }
    taken[best] = true;
    order.push_back(best);
  }
  return order;
}

double penalty_at(std::size_t rank, const RapsParams& params) {
  const auto k = static_cast<std::size_t>(params.k_star);
  if (rank <= k) return 0.0;
  return params.lambda_star * static_cast<double>(rank - k);
}

}  // namespace

SetMatrix split_sets(const Matrix& probs, double tau, const RapsParams& params, std::span<const double> u) {
  const std::size_t n_classes = probs.cols();
  validate(params, static_cast<int>(n_classes));
  detail::check_u(u, probs.rows());

  SetMatrix out(probs.rows(), n_classes);
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    const auto row = probs.row(i);
    require(detail::is_probability_vector(row), ErrorCode::BadProbabilityRow, "row " + std::to_string(i));
    const auto order = rank_order(row);

    std::vector<double> sorted(n_classes);
    std::vector<double> cumsum(n_classes);
    for (std::size_t r = 0; r < n_classes; ++r) sorted[r] = row[order[r]];
    cumsum[0] = sorted[0];
    for (std::size_t r = 1; r < n_classes; ++r) cumsum[r] = cumsum[r - 1] + sorted[r];

    std::size_t L = 1;
    for (std::size_t j = 0; j < n_classes; ++j) {
      if (cumsum[j] + penalty_at(j + 1, params) <= tau) L = j + 2;
    }
    if (L > n_classes) L = n_classes;

    if (params.randomized) {
      const double above = L >= 2 ? cumsum[L - 2] : 0.0;
      const double score = (above + u[i] * sorted[L - 1]) + penalty_at(L, params);
      if (!(score <= tau)) L = L - 1;
      if (L == 0 && !params.allow_empty_sets) L = 1;
    }

    for (std::size_t j = 0; j < L; ++j) out.set(i, order[j]);
  }
  return out;
}

GiqsTensor cross_giqs(const Tensor3& oob_probs, const RapsParams& params, std::span<const double> u) {
  const std::size_t n_classes = oob_probs.d2;
  validate(params, static_cast<int>(n_classes));
  detail::check_u(u, oob_probs.d1);

  GiqsTensor out(oob_probs.d0, oob_probs.d1, n_classes);
  for (std::size_t i = 0; i < oob_probs.d0; ++i) {
    for (std::size_t j = 0; j < oob_probs.d1; ++j) {
      const auto slice = oob_probs.slice(i, j);
      require(detail::is_probability_vector(slice), ErrorCode::BadProbabilitySlice,
              "slice (" + std::to_string(i) + ", " + std::to_string(j) + ")");
      const auto order = rank_order(slice);

      std::vector<double> sorted(n_classes);
      std::vector<double> cumsum(n_classes);
      for (std::size_t k = 0; k < n_classes; ++k) sorted[k] = slice[order[k]];
      cumsum[0] = sorted[0];
      for (std::size_t k = 1; k < n_classes; ++k) cumsum[k] = cumsum[k - 1] + sorted[k];

      const double uj = params.randomized ? u[j] : 1.0;
      std::vector<double> by_rank(n_classes);
      by_rank[0] = (0.0 + (params.allow_empty_sets ? uj : 1.0) * sorted[0]) + penalty_at(1, params);
      for (std::size_t k = 1; k < n_classes; ++k) {
        by_rank[k] = (cumsum[k - 1] + uj * sorted[k]) + penalty_at(k + 1, params);
      }
      for (std::size_t k = 0; k < n_classes; ++k) out(i, j, order[k]) = by_rank[k];
    }
  }
  return out;
}

Matrix pvalues(std::span<const double> calib_scores, const GiqsTensor& giqs) {
  require(calib_scores.size() == giqs.d0, ErrorCode::DimensionMismatch, "score count differs from giqs rows");
  Matrix p(giqs.d1, giqs.d2);
  for (std::size_t j = 0; j < giqs.d1; ++j) {
    for (std::size_t y = 0; y < giqs.d2; ++y) {
      std::size_t count = 0;
      for (std::size_t i = 0; i < giqs.d0; ++i) {
        if (calib_scores[i] >= giqs(i, j, y)) ++count;
      }
      p(j, y) = static_cast<double>(count) / static_cast<double>(giqs.d0);
    }
  }
  return p;
}

}  // namespace cforest::reference
