#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace mmcirt::csv {

/// One parsed CSV file: header plus data rows, all cells as raw strings.
/// Cells are trimmed of surrounding whitespace; quoting is not supported
/// (item IDs and codes never need it).
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based source line of each row
};

Table read(const std::filesystem::path& path);
Table parse(std::string_view text);

/// Shortest round-trip decimal form, independent of the global locale.
std::string format_double(double value);

void write_row(std::ostream& out, const std::vector<std::string>& cells);

}  // namespace mmcirt::csv
