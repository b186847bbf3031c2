#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cforest/dataset.hpp"
#include "cforest/scores.hpp"

namespace cforest {

/// Dense rank-3 array, last index fastest: [d0][d1][d2].
struct Tensor3 {
  std::size_t d0 = 0;
  std::size_t d1 = 0;
  std::size_t d2 = 0;
  std::vector<double> values;

  Tensor3() = default;
  Tensor3(std::size_t a, std::size_t b, std::size_t c, double fill = 0.0)
      : d0(a), d1(b), d2(c), values(a * b * c, fill) {}

  double& operator()(std::size_t i, std::size_t j, std::size_t k) noexcept { return values[(i * d1 + j) * d2 + k]; }
  double operator()(std::size_t i, std::size_t j, std::size_t k) const noexcept { return values[(i * d1 + j) * d2 + k]; }
  std::span<const double> slice(std::size_t i, std::size_t j) const noexcept {
    return {values.data() + (i * d1 + j) * d2, d2};
  }
  std::span<double> slice(std::size_t i, std::size_t j) noexcept { return {values.data() + (i * d1 + j) * d2, d2}; }

  friend bool operator==(const Tensor3&, const Tensor3&) = default;
};

/// Cross-conformity scores, shape (n_active_train x n_test x n_classes).
using GiqsTensor = Tensor3;

/// Boolean (n_test x n_classes); true = class in the prediction set.
struct SetMatrix {
  std::size_t n_rows = 0;
  std::size_t n_classes = 0;
  std::vector<std::uint8_t> bits;

  SetMatrix() = default;
  SetMatrix(std::size_t rows, std::size_t classes) : n_rows(rows), n_classes(classes), bits(rows * classes, 0) {}

  bool contains(std::size_t row, std::size_t cls) const noexcept { return bits[row * n_classes + cls] != 0; }
  void set(std::size_t row, std::size_t cls, bool v = true) noexcept { bits[row * n_classes + cls] = v ? 1 : 0; }
  std::size_t row_size(std::size_t row) const noexcept;
  std::vector<int> classes(std::size_t row) const;

  friend bool operator==(const SetMatrix&, const SetMatrix&) = default;
};

/// Split-conformal prediction sets from test probabilities and threshold tau.
///
/// Per row: sort descending, accumulate, and let L be the smallest rank whose
/// penalized cumulative mass exceeds tau (clamped to C, at least 1). When
/// randomized, the rank-L class stays only if its score with u[row] is <= tau;
/// dropping it may empty the row unless allow_empty_sets is false, in which
/// case the top class is kept. Output is independent of `threads`.
SetMatrix split_sets_kernel(const Matrix& probs, double tau, const RapsParams& params, std::span<const double> u,
                            int threads = 0);

/// Cross-conformity scores for CV+ / J+ab. oob_probs[i, j, :] is test point j's
/// probability vector under training sample i's leave-out model; entry [i, j, y]
/// of the result is the RAPS score of class y with u[j] (u := 1 when not
/// randomized, and at rank 1 when empty sets are disallowed). Parallel over i.
GiqsTensor cross_giqs_kernel(const Tensor3& oob_probs, const RapsParams& params, std::span<const double> u,
                             int threads = 0);

/// p[j, y] = (1 / n_active) * #{ i : calib_scores[i] >= giqs[i, j, y] }.
Matrix pvalues_from_giqs(std::span<const double> calib_scores, const GiqsTensor& giqs, int threads = 0);

}  // namespace cforest
