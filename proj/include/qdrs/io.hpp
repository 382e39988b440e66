#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "qdrs/geometry.hpp"
#include "qdrs/query_sample.hpp"

namespace qdrs::io {

namespace detail {

inline double parse_double(std::string_view tok, std::size_t line) {
  while (!tok.empty() && (tok.front() == ' ' || tok.front() == '\t')) tok.remove_prefix(1);
  while (!tok.empty() && (tok.back() == ' ' || tok.back() == '\t' || tok.back() == '\r')) tok.remove_suffix(1);
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size())
    throw runtime_failure("csv: bad number '" + std::string(tok) + "' on line " + std::to_string(line));
  return v;
}

inline void append_double(std::string& out, double v) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  out.append(buf.data(), ptr);
}

// Rows of comma separated numbers; blank lines and '#' comments skipped.
inline std::vector<std::vector<double>> read_rows(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r" || line.front() == '#') continue;
    std::vector<double> row;
    std::string_view sv(line);
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = sv.find(',', start);
      row.push_back(parse_double(sv.substr(start, comma == std::string_view::npos ? sv.npos : comma - start), lineno));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw runtime_failure("csv: ragged row on line " + std::to_string(lineno));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::ifstream open_in(const std::string& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream f(path, mode);
  if (!f) throw runtime_failure("cannot open '" + path + "' for reading");
  return f;
}

inline std::ofstream open_out(const std::string& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream f(path, mode | std::ios::trunc);
  if (!f) throw runtime_failure("cannot open '" + path + "' for writing");
  return f;
}

template <class T>
void put_le(std::ostream& out, T v) {
  std::array<unsigned char, sizeof(T)> bytes{};
  std::memcpy(bytes.data(), &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <class T>
T get_le(std::istream& in) {
  std::array<unsigned char, sizeof(T)> bytes{};
  if (!in.read(reinterpret_cast<char*>(bytes.data()), sizeof(T))) throw runtime_failure("binary: truncated input");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T v;
  std::memcpy(&v, bytes.data(), sizeof(T));
  return v;
}

}  // namespace detail

inline PointSet read_points_csv(std::istream& in) {
  auto rows = detail::read_rows(in);
  if (rows.empty()) throw runtime_failure("csv: no points");
  return PointSet::from_rows(rows);
}

inline void write_points_csv(std::ostream& out, const PointSet& points) {
  std::string line;
  for (Index i = 0; i < points.size(); ++i) {
    line.clear();
    auto p = points[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      if (k) line.push_back(',');
      detail::append_double(line, p[k]);
    }
    line.push_back('\n');
    out << line;
  }
}

inline constexpr std::array<char, 4> kPointsMagic{'P', 'T', 'S', '1'};

/// Little-endian: "PTS1", u32 n, u32 d, then n*d float64 row-major.
inline void write_points_binary(std::ostream& out, const PointSet& points) {
  out.write(kPointsMagic.data(), kPointsMagic.size());
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(points.size()));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(points.dim()));
  for (double c : points.coords()) detail::put_le<double>(out, c);
}

inline PointSet read_points_binary(std::istream& in) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kPointsMagic) throw runtime_failure("binary: bad magic");
  const auto n = detail::get_le<std::uint32_t>(in);
  const auto d = detail::get_le<std::uint32_t>(in);
  if (d == 0) throw runtime_failure("binary: zero dimension");
  std::vector<double> coords(static_cast<std::size_t>(n) * d);
  for (double& c : coords) c = detail::get_le<double>(in);
  return PointSet(d, std::move(coords));
}

inline bool is_binary_path(const std::string& path) {
  return path.size() >= 4 && (path.ends_with(".bin") || path.ends_with(".pts"));
}

inline PointSet load_points(const std::string& path) {
  if (is_binary_path(path)) {
    auto f = detail::open_in(path, std::ios::binary);
    return read_points_binary(f);
  }
  auto f = detail::open_in(path);
  return read_points_csv(f);
}

inline void save_points(const std::string& path, const PointSet& points) {
  if (is_binary_path(path)) {
    auto f = detail::open_out(path, std::ios::binary);
    write_points_binary(f, points);
    return;
  }
  auto f = detail::open_out(path);
  write_points_csv(f, points);
}

// Query CSV: d center columns followed by the radius.
inline QuerySample read_queries_csv(std::istream& in) {
  auto rows = detail::read_rows(in);
  QuerySample s;
  s.queries.reserve(rows.size());
  for (auto& r : rows) {
    if (r.size() < 2) throw runtime_failure("query csv: need at least one center column and a radius");
    const double radius = r.back();
    r.pop_back();
    if (!(radius >= 0.0)) throw runtime_failure("query csv: negative radius");
    s.queries.emplace_back(std::move(r), radius);
  }
  return s;
}

inline void write_queries_csv(std::ostream& out, const QuerySample& sample) {
  std::string line;
  for (const auto& q : sample.queries) {
    line.clear();
    for (double c : q.center) {
      detail::append_double(line, c);
      line.push_back(',');
    }
    detail::append_double(line, q.radius);
    line.push_back('\n');
    out << line;
  }
}

inline QuerySample load_queries(const std::string& path) {
  auto f = detail::open_in(path);
  return read_queries_csv(f);
}

inline void save_queries(const std::string& path, const QuerySample& sample) {
  auto f = detail::open_out(path);
  write_queries_csv(f, sample);
}

}  // namespace qdrs::io
