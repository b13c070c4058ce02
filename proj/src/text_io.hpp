#pragma once

// Minimal CSV / number helpers shared by the readers and report writers.
// Inputs are plain comma-separated files without quoting.

#include <charconv>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cesplan/error.hpp"

namespace cesplan::detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.emplace_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline double parse_double(std::string_view text, std::string_view what) {
  text = trim(text);
  double v = 0.0;
  const char* first = text.data();
  if (!text.empty() && text.front() == '+') ++first;
  const auto res = std::from_chars(first, text.data() + text.size(), v);
  if (text.empty() || res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw Error(Errc::ParseError, std::string(what) + ": not a number: '" + std::string(text) + "'");
  }
  return v;
}

inline long long parse_int(std::string_view text, std::string_view what) {
  text = trim(text);
  long long v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw Error(Errc::ParseError, std::string(what) + ": not an integer: '" + std::string(text) + "'");
  }
  return v;
}

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

/// Header-addressed CSV table. Blank lines and lines starting with '#' are
/// skipped.
class CsvTable {
 public:
  CsvTable(std::istream& in, std::string_view source, const std::vector<std::string>& required) : source_(source) {
    std::string line;
    bool have_header = false;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto t = trim(line);
      if (t.empty() || t.front() == '#') continue;
      auto fields = split_csv_line(t);
      if (!have_header) {
        for (std::size_t i = 0; i < fields.size(); ++i) columns_[fields[i]] = i;
        for (const auto& name : required) {
          if (!columns_.count(name)) throw Error(Errc::ParseError, source_ + ": missing column '" + name + "'");
        }
        width_ = fields.size();
        have_header = true;
        continue;
      }
      if (fields.size() != width_) {
        throw Error(Errc::ParseError, source_ + ":" + std::to_string(line_no) + ": expected " + std::to_string(width_) +
                                          " fields, got " + std::to_string(fields.size()));
      }
      rows_.push_back(std::move(fields));
      line_numbers_.push_back(line_no);
    }
    if (!have_header) throw Error(Errc::ParseError, source_ + ": empty file");
  }

  std::size_t size() const { return rows_.size(); }
  bool has(const std::string& column) const { return columns_.count(column) != 0; }
  const std::string& field(std::size_t row, const std::string& column) const {
    return rows_[row][columns_.at(column)];
  }
  std::string where(std::size_t row) const { return source_ + ":" + std::to_string(line_numbers_[row]); }

 private:
  std::string source_;
  std::map<std::string, std::size_t> columns_;
  std::size_t width_ = 0;
  std::vector<std::vector<std::string>> rows_;
  std::vector<std::size_t> line_numbers_;
};

}  // namespace cesplan::detail
