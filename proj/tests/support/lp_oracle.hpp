#pragma once

// Independent dense tableau simplex used only as a test oracle.  Deliberately
// shares no code with the library solver: full Gauss-Jordan tableau, two
// phases with artificial variables, Bland's rule throughout.  Requires all
// variable bounds to be finite (test instances are generated that way).

#include <cmath>
#include <vector>

#include "dmsuc/linear_program.hpp"

namespace testsupport {

struct OracleResult {
  enum Status { Optimal, Infeasible } status = Infeasible;
  double objective = 0.0;
  std::vector<double> x;
};

class TableauOracle {
public:
  explicit TableauOracle(const dmsuc::LinearProgram& lp) : lp_(lp) {}

  OracleResult solve() {
    const int n = lp_.num_cols();
    for (int j = 0; j < n; ++j) {
      if (!std::isfinite(lp_.col_lower[j]) || !std::isfinite(lp_.col_upper[j]))
        throw std::logic_error("oracle requires finite variable bounds");
    }

    // Shift x = l + x', x' >= 0, and expand every constraint into <= rows
    // over x'.
    std::vector<std::vector<double>> rows;
    std::vector<double> rhs;
    auto add_le = [&](const std::vector<double>& a, double b) {
      rows.push_back(a);
      rhs.push_back(b);
    };
    std::vector<std::vector<double>> dense(lp_.num_rows(), std::vector<double>(n, 0.0));
    for (std::size_t k = 0; k < lp_.a_vals.size(); ++k)
      dense[lp_.a_rows[k]][lp_.a_cols[k]] += lp_.a_vals[k];
    for (int r = 0; r < lp_.num_rows(); ++r) {
      double shift = 0.0;
      for (int j = 0; j < n; ++j) shift += dense[r][j] * lp_.col_lower[j];
      if (std::isfinite(lp_.row_upper[r])) add_le(dense[r], lp_.row_upper[r] - shift);
      if (std::isfinite(lp_.row_lower[r])) {
        std::vector<double> neg(n);
        for (int j = 0; j < n; ++j) neg[j] = -dense[r][j];
        add_le(neg, -(lp_.row_lower[r] - shift));
      }
    }
    for (int j = 0; j < n; ++j) {
      std::vector<double> e(n, 0.0);
      e[j] = 1.0;
      add_le(e, lp_.col_upper[j] - lp_.col_lower[j]);
    }

    const int m = static_cast<int>(rows.size());
    // tableau columns: n structural + m slacks + up to m artificials + rhs
    int art_count = 0;
    for (int i = 0; i < m; ++i)
      if (rhs[i] < 0) ++art_count;
    const int cols = n + m + art_count;
    tab_.assign(m, std::vector<double>(cols + 1, 0.0));
    basis_.assign(m, -1);
    int art_next = n + m;
    art_begin_ = n + m;
    for (int i = 0; i < m; ++i) {
      double sign = rhs[i] < 0 ? -1.0 : 1.0;
      for (int j = 0; j < n; ++j) tab_[i][j] = sign * rows[i][j];
      tab_[i][n + i] = sign;  // slack
      tab_[i][cols] = sign * rhs[i];
      if (sign < 0) {
        tab_[i][art_next] = 1.0;
        basis_[i] = art_next++;
      } else {
        basis_[i] = n + i;
      }
    }
    cols_ = cols;

    // Phase 1: minimize the artificial sum.
    std::vector<double> phase1_cost(cols, 0.0);
    for (int j = art_begin_; j < cols; ++j) phase1_cost[j] = 1.0;
    if (!iterate(phase1_cost)) throw std::logic_error("oracle: phase-1 unbounded");
    double art_sum = 0.0;
    for (int i = 0; i < m; ++i)
      if (basis_[i] >= art_begin_) art_sum += tab_[i][cols_];
    OracleResult result;
    if (art_sum > 1e-7) return result;  // infeasible

    // Pivot any zero-level artificials out where possible.
    for (int i = 0; i < m; ++i) {
      if (basis_[i] < art_begin_) continue;
      for (int j = 0; j < art_begin_; ++j)
        if (std::fabs(tab_[i][j]) > 1e-9) {
          pivot(i, j);
          break;
        }
    }

    // Phase 2 with the real objective (artificials barred by +inf cost).
    std::vector<double> cost(cols, 0.0);
    for (int j = 0; j < n; ++j) cost[j] = lp_.obj[j];
    for (int j = art_begin_; j < cols; ++j) cost[j] = 1e30;
    if (!iterate(cost)) throw std::logic_error("oracle: unbounded (unexpected with finite bounds)");

    result.status = OracleResult::Optimal;
    result.x.assign(n, 0.0);
    for (int i = 0; i < m; ++i)
      if (basis_[i] < n) result.x[basis_[i]] = tab_[i][cols_];
    result.objective = lp_.obj_offset;
    for (int j = 0; j < n; ++j) {
      result.x[j] += lp_.col_lower[j];
      result.objective += lp_.obj[j] * result.x[j];
    }
    return result;
  }

private:
  bool iterate(const std::vector<double>& cost) {
    const int m = static_cast<int>(tab_.size());
    for (int guard = 0; guard < 100000; ++guard) {
      // reduced costs r_j = c_j - c_B^T T_j; Bland: first negative.
      int entering = -1;
      for (int j = 0; j < cols_; ++j) {
        double r = cost[j];
        for (int i = 0; i < m; ++i) r -= cost[basis_[i]] * tab_[i][j];
        if (r < -1e-9) {
          entering = j;
          break;
        }
      }
      if (entering < 0) return true;
      int leaving = -1;
      double best = dmsuc::kInfinity;
      for (int i = 0; i < m; ++i) {
        if (tab_[i][entering] > 1e-11) {
          double ratio = tab_[i][cols_] / tab_[i][entering];
          if (ratio < best - 1e-12 ||
              (ratio < best + 1e-12 && (leaving < 0 || basis_[i] < basis_[leaving]))) {
            best = ratio;
            leaving = i;
          }
        }
      }
      if (leaving < 0) return false;  // unbounded
      pivot(leaving, entering);
    }
    throw std::logic_error("oracle: iteration guard tripped");
  }

  void pivot(int row, int col) {
    const int m = static_cast<int>(tab_.size());
    double inv = 1.0 / tab_[row][col];
    for (int j = 0; j <= cols_; ++j) tab_[row][j] *= inv;
    for (int i = 0; i < m; ++i) {
      if (i == row) continue;
      double factor = tab_[i][col];
      if (factor == 0.0) continue;
      for (int j = 0; j <= cols_; ++j) tab_[i][j] -= factor * tab_[row][j];
    }
    basis_[row] = col;
  }

  const dmsuc::LinearProgram& lp_;
  std::vector<std::vector<double>> tab_;
  std::vector<int> basis_;
  int cols_ = 0;
  int art_begin_ = 0;
};

inline OracleResult oracle_solve(const dmsuc::LinearProgram& lp) {
  return TableauOracle(lp).solve();
}

}  // namespace testsupport
