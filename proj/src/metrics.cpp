#include "cforest/metrics.hpp"

#include <limits>
#include <string>

#include "cforest/error.hpp"

namespace cforest {

namespace {

bool covers(const PredictionInterval& iv, double y) { return iv.lo <= y && y <= iv.hi; }

}  // namespace

double classification_coverage(const SetMatrix& sets, std::span<const int> y_true) {
  require(sets.n_rows == y_true.size(), ErrorCode::LengthMismatch,
          std::to_string(sets.n_rows) + " sets vs " + std::to_string(y_true.size()) + " labels");
  require(!y_true.empty(), ErrorCode::EmptyInput, "no instances to evaluate");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const int y = y_true[i];
    if (y >= 0 && static_cast<std::size_t>(y) < sets.n_classes && sets.contains(i, static_cast<std::size_t>(y))) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(y_true.size());
}

double average_set_size(const SetMatrix& sets) {
  require(sets.n_rows >= 1, ErrorCode::EmptyInput, "no sets to average");
  std::size_t total = 0;
  for (std::size_t i = 0; i < sets.n_rows; ++i) total += sets.row_size(i);
  return static_cast<double>(total) / static_cast<double>(sets.n_rows);
}

double regression_coverage(std::span<const PredictionInterval> intervals, std::span<const double> y_true) {
  require(intervals.size() == y_true.size(), ErrorCode::LengthMismatch,
          std::to_string(intervals.size()) + " intervals vs " + std::to_string(y_true.size()) + " targets");
  require(!y_true.empty(), ErrorCode::EmptyInput, "no instances to evaluate");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < y_true.size(); ++i) hit += covers(intervals[i], y_true[i]) ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(y_true.size());
}

double average_interval_length(std::span<const PredictionInterval> intervals) {
  require(!intervals.empty(), ErrorCode::EmptyInput, "no intervals to average");
  double total = 0.0;
  for (const auto& iv : intervals) {
    if (!iv.bounded()) return std::numeric_limits<double>::infinity();
    total += iv.hi - iv.lo;
  }
  return total / static_cast<double>(intervals.size());
}

EvalReport evaluate_sets(const SetMatrix& sets, std::span<const int> y_true) {
  EvalReport r;
  r.coverage = classification_coverage(sets, y_true);
  r.mean_size_or_length = average_set_size(sets);
  r.n_evaluated = y_true.size();
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const int y = y_true[i];
    r.covered.push_back(y >= 0 && static_cast<std::size_t>(y) < sets.n_classes &&
                        sets.contains(i, static_cast<std::size_t>(y)));
    r.sizes.push_back(static_cast<double>(sets.row_size(i)));
  }
  return r;
}

EvalReport evaluate_intervals(std::span<const PredictionInterval> intervals, std::span<const double> y_true) {
  EvalReport r;
  r.coverage = regression_coverage(intervals, y_true);
  r.mean_size_or_length = average_interval_length(intervals);
  r.n_evaluated = y_true.size();
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    r.covered.push_back(covers(intervals[i], y_true[i]));
    r.sizes.push_back(intervals[i].length());
  }
  return r;
}

}  // namespace cforest
