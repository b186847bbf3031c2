#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cforest/dataset.hpp"

namespace cforest {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Throws MissingColumn.
  std::size_t column(const std::string& name) const;
};

/// Comma-separated, header row required, optional double quotes. Throws
/// EmptyFile / IoError / InvalidDataset (ragged rows).
CsvTable read_csv(const std::filesystem::path& path);

struct LoadedData {
  Dataset data;
  std::vector<std::string> feature_names;
  /// class index -> original label (classification only)
  std::vector<std::string> class_labels;
};

/// All columns except `target_column` become features. Classification labels
/// are encoded in sorted order (numeric order when every label is a number).
LoadedData load_csv(const std::filesystem::path& path, const std::string& target_column, Task task);

/// Extracts the named feature columns (in that order) from a table.
/// Throws SchemaMismatch when one is missing, NonNumericFeature on bad cells.
Matrix features_from_table(const CsvTable& table, const std::vector<std::string>& feature_names);

/// Parses a finite double; throws NonNumericFeature mentioning `where`.
double parse_number(const std::string& cell, const std::string& where);

/// Shortest text that round-trips the double; "inf" / "-inf" for infinities.
std::string format_double(double v);

}  // namespace cforest
