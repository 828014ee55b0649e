#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace netmom::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  /// 1-based line number of each row in the source file, for error messages.
  std::vector<std::size_t> lines;
};

/// Splits one CSV record. Double-quoted fields may contain commas and `""` escapes.
std::vector<std::string> split_line(std::string_view line);

/// Reads a headed CSV file; blank lines are skipped. Throws DataError.
Table read(const std::filesystem::path& path);

/// Quotes a field when it contains a comma, quote or newline.
std::string escape(std::string_view field);

/// Shortest representation that round-trips the double exactly; NaN is written empty.
std::string format_double(double v);

/// Fixed-precision formatting for human-facing tables.
std::string format_fixed(double v, int decimals);

/// Writes `contents` to a temporary sibling and renames it over `path`.
void write_atomic(const std::filesystem::path& path, std::string_view contents);

double parse_double(std::string_view s, std::string_view what);

}  // namespace netmom::csv
