#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace cforest {

enum class Task : std::uint8_t { Regression = 0, Classification = 1 };

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return rows_ == 0; }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  Matrix select_rows(std::span<const std::size_t> idx) const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Features plus targets. Classification targets are stored as doubles holding
/// class indices in [0, n_classes).
struct Dataset {
  Matrix features;
  std::vector<double> targets;
  Task task = Task::Regression;
  int n_classes = 0;

  std::size_t size() const noexcept { return targets.size(); }
  std::size_t n_features() const noexcept { return features.cols(); }
  int label(std::size_t i) const noexcept { return static_cast<int>(targets[i]); }

  Dataset subset(std::span<const std::size_t> idx) const;
};

/// Throws EmptyDataset / InvalidDataset / NonFiniteInput on violation.
void validate(const Dataset& data);

/// Same task, class count and feature count.
bool same_schema(const Dataset& a, const Dataset& b);

}  // namespace cforest
