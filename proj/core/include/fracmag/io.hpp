#pragma once

// Plain-text serialization shared by the modules and the command-line tool.
// Every floating-point value is written with 17 significant digits so that a
// round trip through text is exact.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "fracmag/geometry.hpp"

namespace fracmag {

std::string format_double(double value);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(std::string_view name) const;
  double number(std::size_t row, int col) const;
};

/// Writes a header line and rows; throws ConfigError when the file cannot be opened.
void write_csv(const std::filesystem::path& path, const CsvTable& table);
CsvTable read_csv(const std::filesystem::path& path);

/// Named per-node column.
struct NodeField {
  std::string name;
  std::vector<double> values;
};

/// One row per node: node, region, x0..x{n-1}, then the given fields.
void write_node_csv(const std::filesystem::path& path, const Grid& grid, const std::vector<NodeField>& fields);

void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);

}  // namespace fracmag
