#pragma once

#include <filesystem>
#include <iosfwd>

#include "cforest/binary_io.hpp"
#include "cforest/forest.hpp"

namespace cforest {

/// Forest serialization (format documented in README.md, "Forest record").
/// load_forest(save_forest(m)) == m exactly.
void write_forest(io::Writer& w, const ForestModel& model);
ForestModel read_forest(io::Reader& r);

void save_forest(const ForestModel& model, const std::filesystem::path& path);
ForestModel load_forest(const std::filesystem::path& path);

}  // namespace cforest
