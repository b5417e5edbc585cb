#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "dmsuc/common.hpp"

namespace dmsuc {

enum class RowSense : char { LE = 'L', GE = 'G', EQ = 'E', Range = 'R' };

/// Sparse LP/MILP container: triplet matrix, two-sided row bounds, variable
/// bounds, and integrality marks.  Rows with both bounds finite and distinct
/// are range rows.
struct LinearProgram {
  std::vector<double> obj;
  double obj_offset = 0.0;
  std::vector<double> col_lower, col_upper;
  std::vector<char> is_integer;
  std::vector<std::string> col_names;  // optional, parallel to columns

  std::vector<double> row_lower, row_upper;
  std::vector<std::string> row_names;  // optional, parallel to rows

  std::vector<int> a_rows, a_cols;
  std::vector<double> a_vals;

  int num_cols() const { return static_cast<int>(obj.size()); }
  int num_rows() const { return static_cast<int>(row_lower.size()); }
  int num_integers() const {
    int n = 0;
    for (char c : is_integer) n += c != 0;
    return n;
  }

  int add_col(double lower, double upper, double objective, bool integer = false,
              std::string name = {}) {
    obj.push_back(objective);
    col_lower.push_back(lower);
    col_upper.push_back(upper);
    is_integer.push_back(integer ? 1 : 0);
    col_names.push_back(std::move(name));
    return num_cols() - 1;
  }

  int add_row(double lower, double upper, std::string name = {}) {
    row_lower.push_back(lower);
    row_upper.push_back(upper);
    row_names.push_back(std::move(name));
    return num_rows() - 1;
  }

  void add_entry(int row, int col, double value) {
    if (value == 0.0) return;
    a_rows.push_back(row);
    a_cols.push_back(col);
    a_vals.push_back(value);
  }

  RowSense row_sense(int r) const {
    double lo = row_lower[static_cast<std::size_t>(r)];
    double hi = row_upper[static_cast<std::size_t>(r)];
    if (lo == hi) return RowSense::EQ;
    if (lo == -kInfinity) return RowSense::LE;
    if (hi == kInfinity) return RowSense::GE;
    return RowSense::Range;
  }

  ValidationReport validate() const {
    ValidationReport report;
    if (num_cols() == 0) report.add("empty", "problem has no variables");
    for (int j = 0; j < num_cols(); ++j) {
      if (col_lower[static_cast<std::size_t>(j)] > col_upper[static_cast<std::size_t>(j)])
        report.add("col_bounds", "column " + col_label(j) + " has lower > upper");
      if (is_integer[static_cast<std::size_t>(j)] &&
          (!std::isfinite(col_lower[static_cast<std::size_t>(j)]) ||
           !std::isfinite(col_upper[static_cast<std::size_t>(j)])))
        report.add("int_bounds", "integer column " + col_label(j) + " must have finite bounds");
      if (!std::isfinite(obj[static_cast<std::size_t>(j)]))
        report.add("obj_finite", "objective of column " + col_label(j) + " is not finite");
    }
    for (int r = 0; r < num_rows(); ++r)
      if (row_lower[static_cast<std::size_t>(r)] > row_upper[static_cast<std::size_t>(r)])
        report.add("row_bounds", "row " + row_label(r) + " has lower > upper");
    for (std::size_t k = 0; k < a_vals.size(); ++k) {
      if (a_rows[k] < 0 || a_rows[k] >= num_rows() || a_cols[k] < 0 || a_cols[k] >= num_cols()) {
        report.add("entry_range", "matrix entry " + std::to_string(k) + " out of range");
        break;
      }
      if (!std::isfinite(a_vals[k])) {
        report.add("entry_finite", "matrix entry " + std::to_string(k) + " is not finite");
        break;
      }
    }
    return report;
  }

  std::string col_label(int j) const {
    const std::string& n = col_names[static_cast<std::size_t>(j)];
    return n.empty() ? "#" + std::to_string(j) : n;
  }
  std::string row_label(int r) const {
    const std::string& n = row_names[static_cast<std::size_t>(r)];
    return n.empty() ? "#" + std::to_string(r) : n;
  }
};

/// Compressed sparse columns built from the triplets; duplicates are summed.
struct CscMatrix {
  int rows = 0, cols = 0;
  std::vector<int> col_start;  // size cols+1
  std::vector<int> row_idx;
  std::vector<double> values;

  static CscMatrix from(const LinearProgram& lp) {
    CscMatrix m;
    m.rows = lp.num_rows();
    m.cols = lp.num_cols();
    std::vector<int> counts(static_cast<std::size_t>(m.cols) + 1, 0);
    for (int c : lp.a_cols) ++counts[static_cast<std::size_t>(c) + 1];
    m.col_start.resize(static_cast<std::size_t>(m.cols) + 1, 0);
    for (int j = 0; j < m.cols; ++j)
      m.col_start[static_cast<std::size_t>(j) + 1] =
          m.col_start[static_cast<std::size_t>(j)] + counts[static_cast<std::size_t>(j) + 1];
    m.row_idx.resize(lp.a_vals.size());
    m.values.resize(lp.a_vals.size());
    std::vector<int> cursor(m.col_start.begin(), m.col_start.end() - 1);
    for (std::size_t k = 0; k < lp.a_vals.size(); ++k) {
      int j = lp.a_cols[k];
      int slot = cursor[static_cast<std::size_t>(j)]++;
      m.row_idx[static_cast<std::size_t>(slot)] = lp.a_rows[k];
      m.values[static_cast<std::size_t>(slot)] = lp.a_vals[k];
    }
    // merge duplicate (row, col) entries within each column
    std::vector<int> out_start(static_cast<std::size_t>(m.cols) + 1, 0);
    std::vector<int> out_rows;
    std::vector<double> out_vals;
    out_rows.reserve(m.row_idx.size());
    out_vals.reserve(m.values.size());
    std::vector<std::pair<int, double>> column;
    for (int j = 0; j < m.cols; ++j) {
      column.clear();
      for (int k = m.col_start[static_cast<std::size_t>(j)]; k < m.col_start[static_cast<std::size_t>(j) + 1]; ++k)
        column.emplace_back(m.row_idx[static_cast<std::size_t>(k)], m.values[static_cast<std::size_t>(k)]);
      std::sort(column.begin(), column.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      for (std::size_t k = 0; k < column.size(); ++k) {
        if (!out_rows.empty() && out_start[static_cast<std::size_t>(j)] < static_cast<int>(out_rows.size()) &&
            k > 0 && column[k].first == column[k - 1].first) {
          out_vals.back() += column[k].second;
        } else {
          out_rows.push_back(column[k].first);
          out_vals.push_back(column[k].second);
        }
      }
      out_start[static_cast<std::size_t>(j) + 1] = static_cast<int>(out_rows.size());
    }
    m.col_start = std::move(out_start);
    m.row_idx = std::move(out_rows);
    m.values = std::move(out_vals);
    return m;
  }
};

enum class SolveStatus { Optimal, Infeasible, Unbounded, LimitReached };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::Unbounded: return "unbounded";
    case SolveStatus::LimitReached: return "limit-reached";
  }
  return "unknown";
}

struct SolveStats {
  long long simplex_iterations = 0;
  long long nodes_explored = 0;
  long long refactorizations = 0;
  double wall_time_sec = 0.0;
};

/// Variable/logical status for warm starts.
enum class VarStatus : char { Basic, AtLower, AtUpper, NonbasicFree };

struct Basis {
  std::vector<VarStatus> status;  // structural columns then row logicals
  bool empty() const { return status.empty(); }
};

struct SolveResult {
  SolveStatus status = SolveStatus::LimitReached;
  std::vector<double> x;       // structural values
  double objective = 0.0;
  double gap = kInfinity;      // relative MIP gap; 0 for proved-optimal LPs
  std::vector<double> row_duals;
  std::vector<double> reduced_costs;
  double dual_objective = 0.0;
  Basis basis;
  SolveStats stats;
  std::string message;
};

}  // namespace dmsuc
