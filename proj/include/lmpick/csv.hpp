#pragma once

// Plain comma-separated tables. Fields never contain commas, quotes or
// newlines (instance ids are file stems, checked on write), so no quoting.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "lmpick/error.hpp"

namespace lmpick::csv {

using Row = std::vector<std::string>;

struct Table {
  Row header;
  std::vector<Row> rows;

  std::size_t column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw Error("csv: missing column '" + std::string(name) + "'");
  }
};

// 17 significant digits: every double survives a write/read cycle exactly.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& s, const std::string& what) {
  double v = 0.0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || end != s.data() + s.size()) throw Error("csv: bad number '" + s + "' in " + what);
  return v;
}

inline std::uint64_t parse_uint(const std::string& s, const std::string& what) {
  std::uint64_t v = 0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || end != s.data() + s.size()) throw Error("csv: bad integer '" + s + "' in " + what);
  return v;
}

inline void check_field(const std::string& f) {
  if (f.find_first_of(",\"\r\n") != std::string::npos) throw Error("csv: field '" + f + "' contains a separator");
}

inline Row split(const std::string& line) {
  Row out;
  std::size_t start = 0;
  for (;;) {
    std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

inline Table parse(std::istream& in, const std::string& source) {
  Table t;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    Row r = split(line);
    if (t.header.empty()) {
      t.header = std::move(r);
      continue;
    }
    if (r.size() != t.header.size()) {
      throw Error(source + ": line " + std::to_string(line_no) + " has " + std::to_string(r.size()) +
                  " fields, header has " + std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(r));
  }
  if (t.header.empty()) throw Error(source + ": empty csv");
  return t;
}

inline Table read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return parse(in, path);
}

inline void write_row(std::ostream& out, const Row& r) {
  for (std::size_t i = 0; i < r.size(); ++i) {
    check_field(r[i]);
    if (i) out << ',';
    out << r[i];
  }
  out << '\n';
}

inline void write_file(const std::string& path, const Table& t) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  write_row(out, t.header);
  for (const Row& r : t.rows) write_row(out, r);
  if (!out) throw Error("write failed: " + path);
}

}  // namespace lmpick::csv
