#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include "cforest/conformal.hpp"

namespace cforest {

/// Everything `predict` needs: the fitted conformal state plus the column
/// schema and label encoding of the training CSV.
struct Bundle {
  Task task = Task::Regression;
  Method method = Method::Split;
  std::uint64_t seed = 0;
  std::vector<std::string> feature_names;
  std::vector<std::string> class_labels;
  std::variant<SplitConformal, CvCalibration, JabCalibration> state;

  const RapsParams& raps() const;
};

inline constexpr std::uint32_t kBundleVersion = 1;

void write_bundle(std::ostream& os, const Bundle& bundle);
Bundle read_bundle(std::istream& is);

void save_bundle(const Bundle& bundle, const std::filesystem::path& path);
Bundle load_bundle(const std::filesystem::path& path);

}  // namespace cforest
