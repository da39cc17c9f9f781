#pragma once

// Minimal comma-separated reader/writer. Fields never contain commas or
// quotes in any of the formats this library writes, so no quoting support.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "cropnet/error.hpp"

namespace cropnet::csv {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      out.push_back(trim(line.substr(start, i - start)));
      start = i + 1;
    }
  }
  return out;
}

// One parsed row with typed accessors that report the row's line number.
class Row {
 public:
  Row(std::vector<std::string_view> fields, std::size_t line) : fields_(std::move(fields)), line_(line) {}

  std::size_t size() const noexcept { return fields_.size(); }
  std::size_t line() const noexcept { return line_; }
  std::string_view field(std::size_t i) const {
    if (i >= fields_.size()) throw ParseError("missing column " + std::to_string(i), line_);
    return fields_[i];
  }
  std::string str(std::size_t i) const { return std::string(field(i)); }

  long long integer(std::size_t i) const {
    auto f = field(i);
    long long v = 0;
    auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
    if (ec != std::errc() || ptr != f.data() + f.size())
      throw ParseError("expected integer, got '" + std::string(f) + "'", line_);
    return v;
  }

  double real(std::size_t i) const {
    std::string f(field(i));
    if (f.empty()) throw ParseError("empty numeric field", line_);
    char* end = nullptr;
    double v = std::strtod(f.c_str(), &end);
    if (end != f.c_str() + f.size()) throw ParseError("expected number, got '" + f + "'", line_);
    return v;
  }

 private:
  std::vector<std::string_view> fields_;
  std::size_t line_;
};

// Calls `fn` for every data row. The first non-empty line must equal
// `header` exactly (after trimming), which guards against schema drift.
inline void read(std::istream& in, std::string_view header, const std::function<void(const Row&)>& fn) {
  std::string line;
  std::size_t lineno = 0;
  bool seen_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view view = trim(line);
    if (view.empty() || view.front() == '#') continue;
    if (!seen_header) {
      if (view != header) throw ParseError("unexpected header '" + std::string(view) + "', want '" + std::string(header) + "'", lineno);
      seen_header = true;
      continue;
    }
    fn(Row(split(view), lineno));
  }
  if (!seen_header) throw ParseError("missing header '" + std::string(header) + "'", lineno);
}

inline void read_file(const std::string& path, std::string_view header, const std::function<void(const Row&)>& fn) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  read(in, header, fn);
}

// Shortest round-trip representation so that written files reload bit-exact.
inline std::string format(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace cropnet::csv
