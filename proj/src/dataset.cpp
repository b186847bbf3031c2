#include "cforest/dataset.hpp"

#include <cmath>
#include <string>

#include "cforest/error.hpp"

namespace cforest {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::InvalidDataset: return "InvalidDataset";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::FeatureCountMismatch: return "FeatureCountMismatch";
    case ErrorCode::EmptyTreeSubset: return "EmptyTreeSubset";
    case ErrorCode::InvalidHyperparams: return "InvalidHyperparams";
    case ErrorCode::NotAProbabilityVector: return "NotAProbabilityVector";
    case ErrorCode::ClassOutOfRange: return "ClassOutOfRange";
    case ErrorCode::UOutOfRange: return "UOutOfRange";
    case ErrorCode::InvalidRapsParams: return "InvalidRapsParams";
    case ErrorCode::AlphaOutOfRange: return "AlphaOutOfRange";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::InvalidKn: return "InvalidKn";
    case ErrorCode::KOutOfRange: return "KOutOfRange";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::TaskMismatch: return "TaskMismatch";
    case ErrorCode::BadProbabilityRow: return "BadProbabilityRow";
    case ErrorCode::BadProbabilitySlice: return "BadProbabilitySlice";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::TuningTooSmall: return "TuningTooSmall";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::NonNumericFeature: return "NonNumericFeature";
    case ErrorCode::EmptyFile: return "EmptyFile";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::NoActiveSamples: return "NoActiveSamples";
    case ErrorCode::AllSamplesInBag: return "AllSamplesInBag";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::CorruptBundle: return "CorruptBundle";
  }
  return "Unknown";
}

bool is_validation(ErrorCode code) {
  switch (code) {
    case ErrorCode::NoActiveSamples:
    case ErrorCode::AllSamplesInBag:
    case ErrorCode::IoError:
    case ErrorCode::CorruptBundle:
      return false;
    default:
      return true;
  }
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  require(data_.size() == rows * cols, ErrorCode::DimensionMismatch,
          "matrix buffer holds " + std::to_string(data_.size()) + " values, expected " +
              std::to_string(rows * cols));
}

Matrix Matrix::select_rows(std::span<const std::size_t> idx) const {
  Matrix out(idx.size(), cols_);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    auto src = row(idx[r]);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

Dataset Dataset::subset(std::span<const std::size_t> idx) const {
  Dataset out;
  out.features = features.select_rows(idx);
  out.targets.reserve(idx.size());
  for (auto i : idx) out.targets.push_back(targets[i]);
  out.task = task;
  out.n_classes = n_classes;
  return out;
}

void validate(const Dataset& data) {
  require(data.size() >= 1, ErrorCode::EmptyDataset, "dataset has no samples");
  require(data.features.rows() == data.size(), ErrorCode::InvalidDataset,
          "feature rows and target count differ");
  for (double v : data.features.data()) {
    // missing features are not supported
    require(std::isfinite(v), ErrorCode::NonFiniteInput, "feature matrix contains NaN or inf");
  }
  for (double y : data.targets) require(std::isfinite(y), ErrorCode::NonFiniteInput, "target is NaN or inf");
  if (data.task == Task::Classification) {
    require(data.n_classes >= 1, ErrorCode::InvalidDataset, "classification needs n_classes >= 1");
    for (double y : data.targets) {
      require(y >= 0 && y < data.n_classes && y == std::floor(y), ErrorCode::InvalidDataset,
              "class target " + std::to_string(y) + " outside [0, n_classes)");
    }
  }
}

bool same_schema(const Dataset& a, const Dataset& b) {
  return a.task == b.task && a.n_features() == b.n_features() &&
         (a.task == Task::Regression || a.n_classes == b.n_classes);
}

}  // namespace cforest
