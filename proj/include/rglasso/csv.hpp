#pragma once

// Minimal CSV reading and writing for numeric tables.

#include <Eigen/Dense>

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "rglasso/edges.hpp"
#include "rglasso/error.hpp"
#include "rglasso/matrix_core.hpp"

namespace rglasso {

/// Shortest round-trip-safe text for a double ("%.17g").
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    std::string_view cell = line.substr(start, comma == std::string_view::npos ? line.npos
                                                                                : comma - start);
    while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
    while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t' || cell.back() == '\r')) {
      cell.remove_suffix(1);
    }
    if (cell.size() >= 2 && cell.front() == '"' && cell.back() == '"') {
      cell = cell.substr(1, cell.size() - 2);
    }
    cells.emplace_back(cell);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

inline bool parse_number(const std::string& text, double& out) {
  if (text.empty()) return false;
  errno = 0;
  char* end = nullptr;
  out = std::strtod(text.c_str(), &end);
  return end == text.c_str() + text.size() && errno == 0;
}

struct NumericTable {
  std::vector<std::string> column_names;
  DataMatrix values;
};

/// Reads a numeric CSV. A first row containing any non-numeric cell is taken
/// as a header; otherwise columns are named V1..Vp. Blank lines are skipped.
inline NumericTable read_numeric_csv(std::istream& in) {
  NumericTable table;
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv_line(line);
    if (first) {
      first = false;
      width = cells.size();
      bool numeric = true;
      for (const auto& c : cells) {
        double v;
        if (!parse_number(c, v)) numeric = false;
      }
      if (!numeric) {
        table.column_names = cells;
        continue;
      }
    }
    if (cells.size() != width) {
      throw DataError("row " + std::to_string(line_no) + ": expected " + std::to_string(width) +
                      " cells, found " + std::to_string(cells.size()));
    }
    std::vector<double> row(width);
    for (std::size_t j = 0; j < width; ++j) {
      if (!parse_number(cells[j], row[j]) || !std::isfinite(row[j])) {
        throw DataError("row " + std::to_string(line_no) + ", column " + std::to_string(j + 1) +
                        ": non-numeric value '" + cells[j] + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  if (table.column_names.empty()) {
    for (std::size_t j = 0; j < width; ++j) table.column_names.push_back("V" + std::to_string(j + 1));
  }
  table.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < width; ++j) {
      table.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return table;
}

inline NumericTable read_numeric_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return read_numeric_csv(in);
}

/// Writes a matrix without a header, one row per line, "%.17g" cells.
inline void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
}

/// `i,j,weight` rows (0-based indices) for each edge of a precision matrix.
inline void write_edge_list_csv(std::ostream& out, const SymmetricMatrix& omega,
                                const EdgeSet& edges) {
  out << "i,j,weight\n";
  for (const Edge& e : edges) {
    out << e.i << ',' << e.j << ',' << format_double(omega(e.i, e.j)) << '\n';
  }
}

}  // namespace rglasso
