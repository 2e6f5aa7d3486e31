#pragma once

#include <charconv>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include "utopia/model.hpp"

namespace utopia {

/// Shortest decimal text that parses back to exactly `v`.
inline std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw std::runtime_error("format_double: conversion failed");
  return std::string(buf, end);
}

inline double parse_double(const std::string& field, std::size_t line) {
  std::size_t b = 0, e = field.size();
  while (b < e && (field[b] == ' ' || field[b] == '\t')) ++b;
  while (e > b && (field[e - 1] == ' ' || field[e - 1] == '\t' || field[e - 1] == '\r')) --e;
  double v = 0.0;
  const char* first = field.data() + b;
  if (b < e && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, field.data() + e, v);
  if (ec != std::errc{} || ptr != field.data() + e)
    throw std::runtime_error("csv line " + std::to_string(line) + ": cannot parse number '" + field + "'");
  return v;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

/// Reads the `x1,...,xd,y` format.
inline Dataset read_dataset_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("csv: empty input");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // UTF-8 BOM
  const auto header = split_csv_line(line);
  if (header.size() < 2) throw std::runtime_error("csv: header needs at least one covariate and y");
  const std::size_t d = header.size() - 1;
  for (std::size_t j = 0; j < d; ++j)
    if (header[j] != "x" + std::to_string(j + 1))
      throw std::runtime_error("csv: expected header column 'x" + std::to_string(j + 1) + "', got '" + header[j] + "'");
  if (header.back() != "y") throw std::runtime_error("csv: last header column must be 'y'");

  std::vector<double> xs, ys;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != d + 1)
      throw std::runtime_error("csv line " + std::to_string(lineno) + ": expected " + std::to_string(d + 1) +
                               " fields, got " + std::to_string(fields.size()));
    for (std::size_t j = 0; j < d; ++j) xs.push_back(parse_double(fields[j], lineno));
    ys.push_back(parse_double(fields[d], lineno));
  }
  if (ys.empty()) throw std::runtime_error("csv: no data rows");
  RowMatrix x(static_cast<Eigen::Index>(ys.size()), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < ys.size(); ++i)
    for (std::size_t j = 0; j < d; ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = xs[i * d + j];
  Eigen::VectorXd y = Eigen::Map<Eigen::VectorXd>(ys.data(), static_cast<Eigen::Index>(ys.size()));
  return Dataset(std::move(x), std::move(y));
}

inline Dataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("csv: cannot open '" + path + "'");
  return read_dataset_csv(in);
}

inline void write_dataset_csv(const Dataset& ds, std::ostream& out) {
  for (std::size_t j = 0; j < ds.dim(); ++j) out << 'x' << (j + 1) << ',';
  out << "y\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto p = ds.point(i);
    for (double v : p) out << format_double(v) << ',';
    out << format_double(ds.response(i)) << '\n';
  }
}

inline void write_dataset_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("csv: cannot open '" + path + "' for writing");
  write_dataset_csv(ds, out);
  if (!out) throw std::runtime_error("csv: write to '" + path + "' failed");
}

}  // namespace utopia
