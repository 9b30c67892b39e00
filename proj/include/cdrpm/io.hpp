#pragma once

// Small text-format helpers shared by every module: RFC 4180 CSV,
// ISO-8601 UTC timestamps and round-trip number formatting.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace cdrpm {

/// Seconds since the Unix epoch, UTC.
using Timestamp = std::int64_t;

std::string format_iso8601(Timestamp t);
/// Accepts `YYYY-MM-DDTHH:MM:SS[Z]` or a plain integer epoch.
Timestamp parse_iso8601(std::string_view text);

/// Shortest representation that parses back to the identical double.
std::string format_double(double v);
double parse_double(std::string_view text);
std::int64_t parse_int(std::string_view text);

namespace csv {

using Row = std::vector<std::string>;

std::string escape(std::string_view field);
void write_row(std::ostream& out, const Row& row);

/// Whole-file reader. The first row is the header and is checked against
/// `expected_header` when that is non-empty.
class Table {
 public:
  static Table read(const std::filesystem::path& path, const Row& expected_header = {});
  static Table parse(std::istream& in, const std::string& source, const Row& expected_header = {});

  const Row& header() const { return header_; }
  const std::vector<Row>& rows() const { return rows_; }
  std::size_t column(std::string_view name) const;

 private:
  Row header_;
  std::vector<Row> rows_;
  std::string source_;
};

}  // namespace csv

std::string read_file(const std::filesystem::path& path);
/// Writes atomically enough for our purposes: truncates then writes; throws
/// Errc::io_error when the file cannot be opened.
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace cdrpm
