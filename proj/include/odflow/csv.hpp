#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace odflow::csv {

/// Splits one CSV line. Double-quoted fields may contain commas and doubled
/// quotes; surrounding whitespace of unquoted fields is trimmed.
std::vector<std::string> split_line(std::string_view line);

std::string_view trim(std::string_view s);

std::optional<double> parse_double(std::string_view s);

/// Line-oriented reader over a headered CSV file. Columns are looked up by
/// header name so files may carry extra columns in any order.
class Reader {
 public:
  explicit Reader(const std::filesystem::path& path);

  const std::vector<std::string>& header() const { return header_; }

  /// Index of `name` in the header, or nullopt.
  std::optional<std::size_t> column(std::string_view name) const;

  /// Like column(), but throws IoError naming the file when absent.
  std::size_t require_column(std::string_view name) const;

  /// Reads the next non-empty record. Returns false at end of file.
  bool next(std::vector<std::string>& fields);

  /// 1-based line number of the record last returned by next().
  std::size_t line_number() const { return line_no_; }

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  std::vector<std::string> header_;
  std::size_t line_no_ = 0;
};

}  // namespace odflow::csv
