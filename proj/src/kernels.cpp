#include "cforest/kernels.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "cforest/error.hpp"
#include "cforest/parallel.hpp"
#include "detail.hpp"

namespace cforest {

std::size_t SetMatrix::row_size(std::size_t row) const noexcept {
  std::size_t n = 0;
  for (std::size_t c = 0; c < n_classes; ++c) n += bits[row * n_classes + c];
  return n;
}

std::vector<int> SetMatrix::classes(std::size_t row) const {
  std::vector<int> out;
  for (std::size_t c = 0; c < n_classes; ++c) {
    if (contains(row, c)) out.push_back(static_cast<int>(c));
  }
  return out;
}

namespace {

constexpr std::size_t kNoBadRow = std::numeric_limits<std::size_t>::max();

}  // namespace

SetMatrix split_sets_kernel(const Matrix& probs, double tau, const RapsParams& params, std::span<const double> u,
                            int threads) {
  const std::size_t n = probs.rows();
  const std::size_t n_classes = probs.cols();
  require(n_classes >= 1, ErrorCode::BadProbabilityRow, "probability matrix has no columns");
  validate(params, static_cast<int>(n_classes));
  detail::check_u(u, n);
  const int nt = resolve_threads(threads);

  std::size_t bad = kNoBadRow;
#pragma omp parallel for reduction(min : bad) num_threads(nt)
  for (std::size_t i = 0; i < n; ++i) {
    if (!detail::is_probability_vector(probs.row(i))) bad = std::min(bad, i);
  }
  require(bad == kNoBadRow, ErrorCode::BadProbabilityRow, "row " + std::to_string(bad) + " is not a probability vector");

  SetMatrix out(n, n_classes);
  const int c_int = static_cast<int>(n_classes);
#pragma omp parallel num_threads(nt)
  {
    std::vector<int> order(n_classes);
    std::vector<double> sorted(n_classes);
    std::vector<double> cumsum(n_classes);

#pragma omp for schedule(static)
    for (std::size_t i = 0; i < n; ++i) {
      auto row = probs.row(i);
      argsort_descending(row, order);
      for (std::size_t r = 0; r < n_classes; ++r) {
        sorted[r] = row[static_cast<std::size_t>(order[r])];
        cumsum[r] = r == 0 ? sorted[0] : cumsum[r - 1] + sorted[r];
      }

      // penalized cumulative mass is non-decreasing in rank
      int set_size = 1;
      for (int rank = 1; rank <= c_int; ++rank) {
        const double full = cumsum[static_cast<std::size_t>(rank - 1)] +
                            rank_penalty(rank, params.k_star, params.lambda_star);
        if (full > tau) break;
        set_size = rank + 1;
      }
      set_size = std::min(set_size, c_int);

      if (params.randomized) {
        const double above = set_size >= 2 ? cumsum[static_cast<std::size_t>(set_size - 2)] : 0.0;
        const double score = rank_score(above, sorted[static_cast<std::size_t>(set_size - 1)], u[i],
                                        rank_penalty(set_size, params.k_star, params.lambda_star));
        if (score > tau) --set_size;
        if (set_size == 0 && !params.allow_empty_sets) set_size = 1;
      }

      for (int r = 0; r < set_size; ++r) out.set(i, static_cast<std::size_t>(order[static_cast<std::size_t>(r)]));
    }
  }
  return out;
}

GiqsTensor cross_giqs_kernel(const Tensor3& oob_probs, const RapsParams& params, std::span<const double> u,
                             int threads) {
  const std::size_t n = oob_probs.d0;
  const std::size_t n_test = oob_probs.d1;
  const std::size_t n_classes = oob_probs.d2;
  require(n_classes >= 1, ErrorCode::BadProbabilitySlice, "tensor has no class axis");
  require(oob_probs.values.size() == n * n_test * n_classes, ErrorCode::DimensionMismatch,
          "tensor buffer does not match its shape");
  validate(params, static_cast<int>(n_classes));
  detail::check_u(u, n_test);
  const int nt = resolve_threads(threads);

  std::size_t bad = kNoBadRow;
#pragma omp parallel for reduction(min : bad) num_threads(nt)
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n_test; ++j) {
      if (!detail::is_probability_vector(oob_probs.slice(i, j))) {
        bad = std::min(bad, i * n_test + j);
        break;
      }
    }
  }
  require(bad == kNoBadRow, ErrorCode::BadProbabilitySlice,
          "slice (" + std::to_string(bad / std::max<std::size_t>(n_test, 1)) + ", " +
              std::to_string(bad % std::max<std::size_t>(n_test, 1)) + ") is not a probability vector");

  // Penalties depend only on rank.
  std::vector<double> penalty(n_classes);
  for (std::size_t r = 0; r < n_classes; ++r) {
    penalty[r] = rank_penalty(static_cast<int>(r) + 1, params.k_star, params.lambda_star);
  }

  GiqsTensor out(n, n_test, n_classes);
#pragma omp parallel num_threads(nt)
  {
    std::vector<int> order(n_classes);

#pragma omp for schedule(static)
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n_test; ++j) {
        auto slice = oob_probs.slice(i, j);
        auto dst = out.slice(i, j);
        argsort_descending(slice, order);
        const double u_j = params.randomized ? u[j] : 1.0;
        double above = 0.0;
        for (std::size_t r = 0; r < n_classes; ++r) {
          const auto cls = static_cast<std::size_t>(order[r]);
          const double own = slice[cls];
          const double u_rank = (r == 0 && !params.allow_empty_sets) ? 1.0 : u_j;
          dst[cls] = rank_score(above, own, u_rank, penalty[r]);
          above = r == 0 ? own : above + own;
        }
      }
    }
  }
  return out;
}

Matrix pvalues_from_giqs(std::span<const double> calib_scores, const GiqsTensor& giqs, int threads) {
  require(calib_scores.size() == giqs.d0, ErrorCode::DimensionMismatch,
          "giqs has " + std::to_string(giqs.d0) + " training rows, scores have " + std::to_string(calib_scores.size()));
  require(giqs.d0 >= 1, ErrorCode::NoActiveSamples, "no calibration scores");
  const std::size_t n = giqs.d0;
  const std::size_t n_test = giqs.d1;
  const std::size_t n_classes = giqs.d2;
  const auto n_active = static_cast<double>(n);

  Matrix p(n_test, n_classes);
#pragma omp parallel num_threads(resolve_threads(threads))
  {
    std::vector<std::size_t> counts(n_classes);
#pragma omp for schedule(static)
    for (std::size_t j = 0; j < n_test; ++j) {
      std::fill(counts.begin(), counts.end(), 0);
      for (std::size_t i = 0; i < n; ++i) {
        const double e = calib_scores[i];
        auto g = giqs.slice(i, j);
        for (std::size_t y = 0; y < n_classes; ++y) counts[y] += e >= g[y] ? 1 : 0;
      }
      for (std::size_t y = 0; y < n_classes; ++y) p(j, y) = static_cast<double>(counts[y]) / n_active;
    }
  }
  return p;
}

}  // namespace cforest
