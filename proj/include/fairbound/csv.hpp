#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fairbound {

/// A CSV file held as strings: header plus data rows, all the same width.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of `name` in the header, if present.
  std::optional<std::size_t> column(std::string_view name) const;
};

/// Reads a UTF-8 CSV with a header row. Double-quoted fields are supported;
/// a trailing '\r' on each line is ignored. Throws Error(kIo/kValidation).
CsvTable read_csv_table(const std::filesystem::path& path);

void write_csv_table(const CsvTable& table, const std::filesystem::path& path);

/// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

/// Strict numeric parse: the whole (trimmed) cell must be a finite number.
std::optional<double> parse_double(std::string_view cell);

std::string_view trim(std::string_view s);

}  // namespace fairbound
