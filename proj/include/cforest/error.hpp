#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cforest {

enum class ErrorCode {
  // input validation
  EmptyDataset,
  InvalidDataset,
  NonFiniteInput,
  FeatureCountMismatch,
  EmptyTreeSubset,
  InvalidHyperparams,
  NotAProbabilityVector,
  ClassOutOfRange,
  UOutOfRange,
  InvalidRapsParams,
  AlphaOutOfRange,
  EmptyInput,
  InvalidKn,
  KOutOfRange,
  SchemaMismatch,
  TaskMismatch,
  BadProbabilityRow,
  BadProbabilitySlice,
  DimensionMismatch,
  LengthMismatch,
  TuningTooSmall,
  MissingColumn,
  NonNumericFeature,
  EmptyFile,
  InvalidConfig,
  // runtime
  NoActiveSamples,
  AllSamplesInBag,
  IoError,
  CorruptBundle,
};

std::string_view to_string(ErrorCode code);

/// True for errors caused by bad user input (CLI exit code 2).
bool is_validation(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace cforest
