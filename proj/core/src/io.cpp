#include "fracmag/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "fracmag/errors.hpp"

namespace fracmag {

std::string format_double(double value) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

int CsvTable::column(std::string_view name) const {
  for (std::size_t c = 0; c < header.size(); ++c)
    if (header[c] == name) return static_cast<int>(c);
  throw ConfigError("csv: missing column '" + std::string(name) + "'");
}

double CsvTable::number(std::size_t row, int col) const {
  const std::string& cell = rows.at(row).at(static_cast<std::size_t>(col));
  double value = 0.0;
  const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size())
    throw ConfigError("csv: line " + std::to_string(row + 2) + ": '" + cell + "' is not a number");
  return value;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open '" + path.string() + "' for writing");
  return out;
}

void write_row(std::ostream& out, const std::vector<std::string>& cells) {
  for (std::size_t c = 0; c < cells.size(); ++c) {
    if (c) out << ',';
    out << cells[c];
  }
  out << '\n';
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

void write_csv(const std::filesystem::path& path, const CsvTable& table) {
  auto out = open_out(path);
  write_row(out, table.header);
  for (const auto& row : table.rows) write_row(out, row);
  if (!out) throw ConfigError("write failure on '" + path.string() + "'");
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("'" + path.string() + "' is empty");
  table.header = split(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() != table.header.size())
      throw ConfigError(path.string() + ": line " + std::to_string(table.rows.size() + 2) + " has " +
                        std::to_string(cells.size()) + " fields, expected " + std::to_string(table.header.size()));
    table.rows.push_back(std::move(cells));
  }
  return table;
}

void write_node_csv(const std::filesystem::path& path, const Grid& grid, const std::vector<NodeField>& fields) {
  CsvTable table;
  table.header = {"node", "region"};
  for (int d = 0; d < grid.dimension(); ++d) table.header.push_back("x" + std::to_string(d));
  for (const auto& f : fields) {
    if (f.values.size() != static_cast<std::size_t>(grid.size()))
      throw PreconditionError("write_node_csv: field '" + f.name + "' has the wrong length");
    table.header.push_back(f.name);
  }
  table.rows.reserve(static_cast<std::size_t>(grid.size()));
  for (int i = 0; i < grid.size(); ++i) {
    std::vector<std::string> row{std::to_string(i), to_string(grid.region(i))};
    for (int d = 0; d < grid.dimension(); ++d) row.push_back(format_double(grid.node(i)[d]));
    for (const auto& f : fields) row.push_back(format_double(f.values[static_cast<std::size_t>(i)]));
    table.rows.push_back(std::move(row));
  }
  write_csv(path, table);
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  auto out = open_out(path);
  out << text;
  if (!out) throw ConfigError("write failure on '" + path.string() + "'");
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace fracmag
