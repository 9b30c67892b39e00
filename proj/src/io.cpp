#include "cdrpm/io.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "cdrpm/error.hpp"

namespace cdrpm {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_input: return "InvalidInput";
    case Errc::unsorted_input: return "UnsortedInput";
    case Errc::clipping_exhausted: return "ClippingExhausted";
    case Errc::unresolved_region: return "UnresolvedRegion";
    case Errc::empty_log: return "EmptyLog";
    case Errc::mismatched_log: return "MismatchedLog";
    case Errc::empty_selection: return "EmptySelection";
    case Errc::empty_model: return "EmptyModel";
    case Errc::degenerate_input: return "DegenerateInput";
    case Errc::class_mismatch: return "ClassMismatch";
    case Errc::invalid_config: return "InvalidConfig";
    case Errc::scenario_mismatch: return "ScenarioMismatch";
    case Errc::dependency_missing: return "DependencyMissing";
    case Errc::io_error: return "IoError";
  }
  return "Unknown";
}

std::string format_iso8601(Timestamp t) {
  using namespace std::chrono;
  const sys_seconds s{seconds{t}};
  const auto day = floor<days>(s);
  const year_month_day ymd{day};
  const hh_mm_ss hms{s - day};
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02ld:%02ld:%02ldZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<long>(hms.hours().count()), static_cast<long>(hms.minutes().count()),
                static_cast<long>(hms.seconds().count()));
  return buf;
}

namespace {

int digits(std::string_view text, std::size_t pos, std::size_t n) {
  int v = 0;
  for (std::size_t i = pos; i < pos + n; ++i) {
    const char c = text[i];
    if (c < '0' || c > '9') throw Error(Errc::invalid_input, "bad timestamp: " + std::string(text));
    v = v * 10 + (c - '0');
  }
  return v;
}

}  // namespace

Timestamp parse_iso8601(std::string_view text) {
  if (!text.empty() && text.find_first_not_of("-0123456789") == std::string_view::npos) {
    return parse_int(text);
  }
  // YYYY-MM-DDTHH:MM:SS
  if (text.size() < 19 || text[4] != '-' || text[7] != '-' || (text[10] != 'T' && text[10] != ' ') ||
      text[13] != ':' || text[16] != ':') {
    throw Error(Errc::invalid_input, "bad timestamp: " + std::string(text));
  }
  const auto rest = text.substr(19);
  if (!(rest.empty() || rest == "Z" || rest == "+00:00")) {
    throw Error(Errc::invalid_input, "timestamp must be UTC: " + std::string(text));
  }
  using namespace std::chrono;
  const year_month_day ymd{year{digits(text, 0, 4)}, month{static_cast<unsigned>(digits(text, 5, 2))},
                           day{static_cast<unsigned>(digits(text, 8, 2))}};
  if (!ymd.ok()) throw Error(Errc::invalid_input, "bad date: " + std::string(text));
  const int hh = digits(text, 11, 2), mm = digits(text, 14, 2), ss = digits(text, 17, 2);
  if (hh > 23 || mm > 59 || ss > 60) throw Error(Errc::invalid_input, "bad time: " + std::string(text));
  const sys_days d{ymd};
  return d.time_since_epoch().count() * 86400LL + hh * 3600LL + mm * 60LL + ss;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text) {
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw Error(Errc::invalid_input, "not a number: '" + std::string(text) + "'");
  }
  return v;
}

std::int64_t parse_int(std::string_view text) {
  std::int64_t v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw Error(Errc::invalid_input, "not an integer: '" + std::string(text) + "'");
  }
  return v;
}

namespace csv {

std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (const char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

void write_row(std::ostream& out, const Row& row) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out << ',';
    out << escape(row[i]);
  }
  out << '\n';
}

Table Table::parse(std::istream& in, const std::string& source, const Row& expected_header) {
  Table table;
  table.source_ = source;
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  std::vector<Row> rows;
  Row row;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  for (std::size_t i = 0; i < content.size(); ++i) {
    const char c = content[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < content.size() && content[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        quoted = true;
        field_started = true;
        break;
      case ',':
        row.push_back(std::move(field));
        field.clear();
        field_started = true;
        break;
      case '\r':
        break;
      case '\n':
        if (field_started || !field.empty() || !row.empty()) {
          row.push_back(std::move(field));
          rows.push_back(std::move(row));
        }
        row.clear();
        field.clear();
        field_started = false;
        break;
      default:
        field += c;
        field_started = true;
    }
  }
  if (quoted) throw Error(Errc::invalid_input, source + ": unterminated quoted field");
  if (field_started || !field.empty() || !row.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(Errc::invalid_input, source + ": missing CSV header");

  table.header_ = std::move(rows.front());
  if (!expected_header.empty() && table.header_ != expected_header) {
    std::string want;
    for (const auto& h : expected_header) want += (want.empty() ? "" : ",") + h;
    throw Error(Errc::invalid_input, source + ": expected header '" + want + "'");
  }
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != table.header_.size()) {
      throw Error(Errc::invalid_input, source + ": row " + std::to_string(r + 1) + " has " +
                                           std::to_string(rows[r].size()) + " fields, expected " +
                                           std::to_string(table.header_.size()));
    }
    table.rows_.push_back(std::move(rows[r]));
  }
  return table;
}

Table Table::read(const std::filesystem::path& path, const Row& expected_header) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open " + path.string());
  return parse(in, path.string(), expected_header);
}

std::size_t Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header_.size(); ++i) {
    if (header_[i] == name) return i;
  }
  throw Error(Errc::invalid_input, source_ + ": missing column '" + std::string(name) + "'");
}

}  // namespace csv

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(Errc::io_error, "write failed: " + path.string());
}

}  // namespace cdrpm
