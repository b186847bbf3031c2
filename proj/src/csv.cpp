#include "cforest/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "cforest/error.hpp"

namespace cforest {

namespace {

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  cells.push_back(trim(cur));
  return cells;
}

bool try_parse(const std::string& cell, double& out) {
  if (cell.empty()) return false;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

}  // namespace

std::size_t CsvTable::column(const std::string& name) const {
  auto it = std::find(header.begin(), header.end(), name);
  require(it != header.end(), ErrorCode::MissingColumn, "column '" + name + "' not found");
  return static_cast<std::size_t>(it - header.begin());
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::IoError, "cannot open " + path.string());
  CsvTable table;
  std::string line;
  bool have_header = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto cells = split_line(line);
    if (!have_header) {
      table.header = std::move(cells);
      have_header = true;
      continue;
    }
    require(cells.size() == table.header.size(), ErrorCode::InvalidDataset,
            path.string() + ":" + std::to_string(line_no) + ": expected " + std::to_string(table.header.size()) +
                " cells, found " + std::to_string(cells.size()));
    table.rows.push_back(std::move(cells));
  }
  require(have_header, ErrorCode::EmptyFile, path.string() + " is empty");
  return table;
}

double parse_number(const std::string& cell, const std::string& where) {
  double v = 0.0;
  require(try_parse(cell, v) && std::isfinite(v), ErrorCode::NonNumericFeature,
          where + ": '" + cell + "' is not a finite number");
  return v;
}

Matrix features_from_table(const CsvTable& table, const std::vector<std::string>& feature_names) {
  std::vector<std::size_t> cols;
  for (const auto& name : feature_names) {
    auto it = std::find(table.header.begin(), table.header.end(), name);
    require(it != table.header.end(), ErrorCode::SchemaMismatch, "feature column '" + name + "' missing");
    cols.push_back(static_cast<std::size_t>(it - table.header.begin()));
  }
  Matrix X(table.rows.size(), cols.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    for (std::size_t f = 0; f < cols.size(); ++f) {
      X(r, f) = parse_number(table.rows[r][cols[f]], "row " + std::to_string(r + 1) + ", column " + feature_names[f]);
    }
  }
  return X;
}

LoadedData load_csv(const std::filesystem::path& path, const std::string& target_column, Task task) {
  const CsvTable table = read_csv(path);
  require(!table.rows.empty(), ErrorCode::EmptyFile, path.string() + " has a header but no rows");
  const std::size_t target = table.column(target_column);

  LoadedData out;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (c != target) out.feature_names.push_back(table.header[c]);
  }
  out.data.task = task;
  out.data.features = features_from_table(table, out.feature_names);
  out.data.targets.resize(table.rows.size());

  if (task == Task::Regression) {
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      out.data.targets[r] = parse_number(table.rows[r][target], "row " + std::to_string(r + 1) + ", target");
    }
  } else {
    std::vector<std::string> labels;
    for (const auto& row : table.rows) labels.push_back(row[target]);
    std::sort(labels.begin(), labels.end());
    labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
    bool numeric = true;
    double tmp = 0.0;
    for (const auto& l : labels) numeric = numeric && try_parse(l, tmp);
    if (numeric) {
      std::stable_sort(labels.begin(), labels.end(), [](const std::string& a, const std::string& b) {
        double x = 0.0, y = 0.0;
        try_parse(a, x);
        try_parse(b, y);
        return x < y;
      });
    }
    std::map<std::string, int> index;
    for (std::size_t k = 0; k < labels.size(); ++k) index[labels[k]] = static_cast<int>(k);
    for (std::size_t r = 0; r < table.rows.size(); ++r) out.data.targets[r] = index.at(table.rows[r][target]);
    out.class_labels = std::move(labels);
    out.data.n_classes = static_cast<int>(out.class_labels.size());
  }
  validate(out.data);
  return out;
}

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace cforest
