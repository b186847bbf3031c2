#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cforest/conformal.hpp"

namespace cforest {

struct EvalReport {
  double coverage = 0.0;
  /// mean set size (classification) or mean interval length (regression)
  double mean_size_or_length = 0.0;
  std::size_t n_evaluated = 0;
  std::vector<bool> covered;
  std::vector<double> sizes;
};

/// Fraction of rows whose set contains y_true. Throws LengthMismatch.
double classification_coverage(const SetMatrix& sets, std::span<const int> y_true);

/// Mean cardinality. Throws EmptyInput.
double average_set_size(const SetMatrix& sets);

/// Fraction with lo <= y <= hi (closed; infinite bounds always cover).
double regression_coverage(std::span<const PredictionInterval> intervals, std::span<const double> y_true);

/// Mean hi - lo; +inf when any interval is unbounded. Throws EmptyInput.
double average_interval_length(std::span<const PredictionInterval> intervals);

EvalReport evaluate_sets(const SetMatrix& sets, std::span<const int> y_true);
EvalReport evaluate_intervals(std::span<const PredictionInterval> intervals, std::span<const double> y_true);

}  // namespace cforest
