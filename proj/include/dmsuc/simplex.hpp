#pragma once

// Bounded-variable revised primal simplex.
//
// The problem is solved in computational form: append one logical variable
// per row carrying the row bounds, so the constraints become A x - z = 0 and
// every bound lives on a (structural or logical) variable.  The basis is
// held as a dense LU factorization refreshed periodically, with product-form
// eta vectors between refactorizations.
//
// Determinism: Dantzig pricing with lowest-index tie-breaks, largest-pivot
// ratio tie-breaks, and Bland's rule after a degeneracy streak.  Identical
// inputs and options give identical results.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <vector>

#include "dmsuc/common.hpp"
#include "dmsuc/linear_algebra.hpp"
#include "dmsuc/linear_program.hpp"

namespace dmsuc {

struct LpOptions {
  long long max_iterations = -1;  // -1: scale with problem size
  double feas_tol = 1e-7;
  double dual_tol = 1e-9;
  int refactor_every = 64;
  int bland_after = 200;      // degenerate steps before switching to Bland's rule
  const Basis* warm_start = nullptr;
};

namespace detail {

class BoundedSimplex {
public:
  BoundedSimplex(const LinearProgram& lp, const CscMatrix& csc, const LpOptions& options)
      : lp_(lp), A_(csc), opt_(options), n_(lp.num_cols()), m_(lp.num_rows()) {
    total_ = n_ + m_;
    cost_.assign(static_cast<std::size_t>(total_), 0.0);
    lower_.resize(static_cast<std::size_t>(total_));
    upper_.resize(static_cast<std::size_t>(total_));
    for (int j = 0; j < n_; ++j) {
      cost_[static_cast<std::size_t>(j)] = lp.obj[static_cast<std::size_t>(j)];
      lower_[static_cast<std::size_t>(j)] = lp.col_lower[static_cast<std::size_t>(j)];
      upper_[static_cast<std::size_t>(j)] = lp.col_upper[static_cast<std::size_t>(j)];
    }
    for (int r = 0; r < m_; ++r) {
      lower_[static_cast<std::size_t>(n_ + r)] = lp.row_lower[static_cast<std::size_t>(r)];
      upper_[static_cast<std::size_t>(n_ + r)] = lp.row_upper[static_cast<std::size_t>(r)];
    }
    max_iter_ = opt_.max_iterations > 0
                    ? opt_.max_iterations
                    : 20000 + 200LL * static_cast<long long>(total_);
  }

  SolveResult solve() {
    auto t0 = std::chrono::steady_clock::now();
    SolveResult result;
    if (!init_basis()) {
      result.status = SolveStatus::LimitReached;
      result.message = "basis factorization failed";
      return result;
    }

    bool feasible = run_phase(/*phase1=*/true, result);
    if (result.status == SolveStatus::LimitReached && !result.message.empty()) {
      finish(result, t0);
      return result;
    }
    if (!feasible) {
      result.status = SolveStatus::Infeasible;
      result.message = "primal infeasible (phase 1 optimum with residual infeasibility)";
      finish(result, t0);
      return result;
    }
    run_phase(/*phase1=*/false, result);
    finish(result, t0);
    return result;
  }

private:
  // --- column access -------------------------------------------------------

  template <typename Fn>
  void for_column(int var, Fn&& fn) const {
    if (var < n_) {
      for (int k = A_.col_start[static_cast<std::size_t>(var)];
           k < A_.col_start[static_cast<std::size_t>(var) + 1]; ++k)
        fn(A_.row_idx[static_cast<std::size_t>(k)], A_.values[static_cast<std::size_t>(k)]);
    } else {
      fn(var - n_, -1.0);
    }
  }

  double dot_column(const std::vector<double>& y, int var) const {
    double sum = 0.0;
    for_column(var, [&](int row, double value) { sum += y[static_cast<std::size_t>(row)] * value; });
    return sum;
  }

  // --- basis management ----------------------------------------------------

  bool init_basis() {
    status_.assign(static_cast<std::size_t>(total_), VarStatus::AtLower);
    basic_.clear();
    if (opt_.warm_start && !opt_.warm_start->empty() &&
        static_cast<int>(opt_.warm_start->status.size()) == total_) {
      status_ = opt_.warm_start->status;
      for (int j = 0; j < total_; ++j)
        if (status_[static_cast<std::size_t>(j)] == VarStatus::Basic) basic_.push_back(j);
      if (static_cast<int>(basic_.size()) == m_ && refactor()) {
        set_nonbasic_values();
        compute_basic_values();
        return true;
      }
      // fall through to a cold start on any inconsistency
      status_.assign(static_cast<std::size_t>(total_), VarStatus::AtLower);
      basic_.clear();
    }
    for (int j = 0; j < n_; ++j) {
      if (std::isfinite(lower_[static_cast<std::size_t>(j)]))
        status_[static_cast<std::size_t>(j)] = VarStatus::AtLower;
      else if (std::isfinite(upper_[static_cast<std::size_t>(j)]))
        status_[static_cast<std::size_t>(j)] = VarStatus::AtUpper;
      else
        status_[static_cast<std::size_t>(j)] = VarStatus::NonbasicFree;
    }
    for (int r = 0; r < m_; ++r) {
      status_[static_cast<std::size_t>(n_ + r)] = VarStatus::Basic;
      basic_.push_back(n_ + r);
    }
    if (!refactor()) return false;
    set_nonbasic_values();
    compute_basic_values();
    return true;
  }

  void set_nonbasic_values() {
    value_.assign(static_cast<std::size_t>(total_), 0.0);
    for (int j = 0; j < total_; ++j) {
      switch (status_[static_cast<std::size_t>(j)]) {
        case VarStatus::AtLower: value_[static_cast<std::size_t>(j)] = lower_[static_cast<std::size_t>(j)]; break;
        case VarStatus::AtUpper: value_[static_cast<std::size_t>(j)] = upper_[static_cast<std::size_t>(j)]; break;
        case VarStatus::NonbasicFree: value_[static_cast<std::size_t>(j)] = 0.0; break;
        case VarStatus::Basic: break;
      }
    }
  }

  bool refactor() {
    std::vector<double> dense(static_cast<std::size_t>(m_) * static_cast<std::size_t>(m_), 0.0);
    for (int p = 0; p < m_; ++p) {
      for_column(basic_[static_cast<std::size_t>(p)], [&](int row, double value) {
        dense[static_cast<std::size_t>(row) * static_cast<std::size_t>(m_) + static_cast<std::size_t>(p)] = value;
      });
    }
    etas_.clear();
    ++refactor_count_;
    return lu_.factor(std::move(dense), m_);
  }

  /// x_B = B^{-1} (-sum over nonbasic of a_j x_j)
  void compute_basic_values() {
    std::vector<double> rhs(static_cast<std::size_t>(m_), 0.0);
    for (int j = 0; j < total_; ++j) {
      if (status_[static_cast<std::size_t>(j)] == VarStatus::Basic) continue;
      double xj = value_[static_cast<std::size_t>(j)];
      if (xj == 0.0) continue;
      for_column(j, [&](int row, double value) { rhs[static_cast<std::size_t>(row)] -= value * xj; });
    }
    ftran(rhs);
    for (int p = 0; p < m_; ++p)
      value_[static_cast<std::size_t>(basic_[static_cast<std::size_t>(p)])] = rhs[static_cast<std::size_t>(p)];
  }

  void ftran(std::vector<double>& w) const {
    lu_.solve(w.data());
    for (const auto& eta : etas_) {
      double pivot_val = w[static_cast<std::size_t>(eta.pos)] / eta.d[static_cast<std::size_t>(eta.pos)];
      if (pivot_val != 0.0) {
        for (int i = 0; i < m_; ++i)
          if (i != eta.pos) w[static_cast<std::size_t>(i)] -= eta.d[static_cast<std::size_t>(i)] * pivot_val;
      }
      w[static_cast<std::size_t>(eta.pos)] = pivot_val;
    }
  }

  void btran(std::vector<double>& y) const {
    for (auto it = etas_.rbegin(); it != etas_.rend(); ++it) {
      double dot = 0.0;
      for (int i = 0; i < m_; ++i) dot += it->d[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(i)];
      double yp = y[static_cast<std::size_t>(it->pos)];
      y[static_cast<std::size_t>(it->pos)] =
          (yp - dot + it->d[static_cast<std::size_t>(it->pos)] * yp) / it->d[static_cast<std::size_t>(it->pos)];
    }
    lu_.solve_transpose(y.data());
  }

  // --- feasibility bookkeeping ----------------------------------------------

  double infeasibility_of(int var) const {
    double v = value_[static_cast<std::size_t>(var)];
    if (v < lower_[static_cast<std::size_t>(var)] - opt_.feas_tol)
      return lower_[static_cast<std::size_t>(var)] - v;
    if (v > upper_[static_cast<std::size_t>(var)] + opt_.feas_tol)
      return v - upper_[static_cast<std::size_t>(var)];
    return 0.0;
  }

  double total_infeasibility() const {
    double sum = 0.0;
    for (int p = 0; p < m_; ++p) sum += infeasibility_of(basic_[static_cast<std::size_t>(p)]);
    return sum;
  }

  // --- the main iteration loop -----------------------------------------------

  /// Runs phase 1 (true: drive infeasibility to zero) or phase 2.  Returns
  /// feasibility for phase 1, and fills `result` status/message for phase 2
  /// or on iteration/numerical limits.
  bool run_phase(bool phase1, SolveResult& result) {
    int degenerate_streak = 0;
    while (true) {
      if (iterations_ >= max_iter_) {
        result.status = SolveStatus::LimitReached;
        result.message = "simplex iteration limit reached";
        return !phase1;
      }
      if (phase1 && total_infeasibility() <= opt_.feas_tol) return true;

      // Phase-specific basic costs; in phase 1 the gradient of the
      // infeasibility sum: -1 below the lower bound, +1 above the upper.
      std::vector<double> y(static_cast<std::size_t>(m_), 0.0);
      if (phase1) {
        for (int p = 0; p < m_; ++p) {
          int var = basic_[static_cast<std::size_t>(p)];
          double v = value_[static_cast<std::size_t>(var)];
          if (v < lower_[static_cast<std::size_t>(var)] - opt_.feas_tol)
            y[static_cast<std::size_t>(p)] = -1.0;
          else if (v > upper_[static_cast<std::size_t>(var)] + opt_.feas_tol)
            y[static_cast<std::size_t>(p)] = 1.0;
        }
      } else {
        for (int p = 0; p < m_; ++p)
          y[static_cast<std::size_t>(p)] = cost_[static_cast<std::size_t>(basic_[static_cast<std::size_t>(p)])];
      }
      btran(y);

      // Pricing: most negative directional reduced cost, lowest index under
      // Bland's rule.
      bool bland = degenerate_streak >= opt_.bland_after;
      int entering = -1;
      int direction = 0;
      double best_score = opt_.dual_tol;
      for (int j = 0; j < total_; ++j) {
        VarStatus st = status_[static_cast<std::size_t>(j)];
        if (st == VarStatus::Basic) continue;
        if (lower_[static_cast<std::size_t>(j)] == upper_[static_cast<std::size_t>(j)]) continue;
        double r = (phase1 ? 0.0 : cost_[static_cast<std::size_t>(j)]) - dot_column(y, j);
        int dir = 0;
        double score = 0.0;
        if (st == VarStatus::AtLower && r < -opt_.dual_tol) {
          dir = +1;
          score = -r;
        } else if (st == VarStatus::AtUpper && r > opt_.dual_tol) {
          dir = -1;
          score = r;
        } else if (st == VarStatus::NonbasicFree && std::fabs(r) > opt_.dual_tol) {
          dir = r < 0 ? +1 : -1;
          score = std::fabs(r);
        }
        if (dir == 0) continue;
        if (bland) {
          entering = j;
          direction = dir;
          break;
        }
        if (score > best_score) {
          best_score = score;
          entering = j;
          direction = dir;
        }
      }
      if (entering < 0) {
        if (phase1) return total_infeasibility() <= opt_.feas_tol;
        result.status = SolveStatus::Optimal;
        return true;
      }

      // Direction of basic values: x_B(theta) = x_B - s*theta*d.
      std::vector<double> d(static_cast<std::size_t>(m_), 0.0);
      for_column(entering, [&](int row, double value) { d[static_cast<std::size_t>(row)] = value; });
      ftran(d);

      // Ratio test.  Basic variable rates; in phase 1 infeasible basics
      // block only when they reach their violated bound (turning feasible).
      const double piv_tol = 1e-9;
      double best_theta = kInfinity;
      int leaving_pos = -1;        // basis position of the blocking variable
      double leaving_pivot = 0.0;  // |d| of the blocker
      VarStatus leaving_to = VarStatus::AtLower;
      double own_range = upper_[static_cast<std::size_t>(entering)] - lower_[static_cast<std::size_t>(entering)];
      bool own_blocks = std::isfinite(own_range) &&
                        status_[static_cast<std::size_t>(entering)] != VarStatus::NonbasicFree;
      if (own_blocks) best_theta = own_range;

      for (int p = 0; p < m_; ++p) {
        double rate = -static_cast<double>(direction) * d[static_cast<std::size_t>(p)];
        if (std::fabs(rate) <= piv_tol) continue;
        int var = basic_[static_cast<std::size_t>(p)];
        double v = value_[static_cast<std::size_t>(var)];
        double lo = lower_[static_cast<std::size_t>(var)];
        double hi = upper_[static_cast<std::size_t>(var)];
        double theta = kInfinity;
        VarStatus target;
        if (v < lo - opt_.feas_tol) {
          if (rate <= 0) continue;  // moves further below; rate of infeasibility already priced
          theta = (lo - v) / rate;
          target = VarStatus::AtLower;
        } else if (v > hi + opt_.feas_tol) {
          if (rate >= 0) continue;
          theta = (hi - v) / rate;
          target = VarStatus::AtUpper;
        } else if (rate > 0) {
          if (!std::isfinite(hi)) continue;
          theta = (hi - v) / rate;
          target = VarStatus::AtUpper;
        } else {
          if (!std::isfinite(lo)) continue;
          theta = (lo - v) / rate;
          target = VarStatus::AtLower;
        }
        if (theta < 0) theta = 0;  // numerical degeneracy
        bool better;
        if (theta < best_theta - 1e-10) {
          better = true;
        } else if (theta <= best_theta + 1e-10) {
          // tie: prefer the largest pivot for stability, lowest variable
          // index under Bland
          if (bland) {
            better = leaving_pos < 0 ||
                     var < basic_[static_cast<std::size_t>(leaving_pos)];
          } else {
            better = leaving_pos < 0 || std::fabs(d[static_cast<std::size_t>(p)]) > leaving_pivot;
          }
        } else {
          better = false;
        }
        if (better) {
          best_theta = std::min(best_theta, theta);
          leaving_pos = p;
          leaving_pivot = std::fabs(d[static_cast<std::size_t>(p)]);
          leaving_to = target;
        }
      }

      if (!std::isfinite(best_theta)) {
        if (phase1) {
          result.status = SolveStatus::LimitReached;
          result.message = "numerical breakdown: unbounded phase-1 direction";
          return false;
        }
        result.status = SolveStatus::Unbounded;
        result.message = "LP is unbounded";
        return true;
      }

      ++iterations_;
      degenerate_streak = best_theta <= 1e-12 ? degenerate_streak + 1 : 0;

      // Apply the step.
      double step = static_cast<double>(direction) * best_theta;
      if (best_theta > 0) {
        for (int p = 0; p < m_; ++p) {
          if (d[static_cast<std::size_t>(p)] == 0.0) continue;
          int var = basic_[static_cast<std::size_t>(p)];
          value_[static_cast<std::size_t>(var)] -= step * d[static_cast<std::size_t>(p)];
        }
      }
      value_[static_cast<std::size_t>(entering)] += step;

      if (leaving_pos < 0) {
        // Bound flip: the entering variable ran to its opposite bound.
        status_[static_cast<std::size_t>(entering)] =
            direction > 0 ? VarStatus::AtUpper : VarStatus::AtLower;
        value_[static_cast<std::size_t>(entering)] =
            direction > 0 ? upper_[static_cast<std::size_t>(entering)] : lower_[static_cast<std::size_t>(entering)];
        continue;
      }

      int leaving_var = basic_[static_cast<std::size_t>(leaving_pos)];
      if (std::fabs(d[static_cast<std::size_t>(leaving_pos)]) < 1e-11) {
        // Unusable pivot: refresh the factorization and retry the iteration.
        if (!recover(result)) return !phase1;
        continue;
      }
      status_[static_cast<std::size_t>(leaving_var)] = leaving_to;
      value_[static_cast<std::size_t>(leaving_var)] =
          leaving_to == VarStatus::AtLower ? lower_[static_cast<std::size_t>(leaving_var)]
                                           : upper_[static_cast<std::size_t>(leaving_var)];
      status_[static_cast<std::size_t>(entering)] = VarStatus::Basic;
      basic_[static_cast<std::size_t>(leaving_pos)] = entering;
      etas_.push_back({leaving_pos, d});

      if (static_cast<int>(etas_.size()) >= opt_.refactor_every) {
        if (!recover(result)) return !phase1;
      }
    }
  }

  /// Refactors and recomputes basic values; false on factorization failure.
  bool recover(SolveResult& result) {
    if (!refactor()) {
      result.status = SolveStatus::LimitReached;
      result.message = "numerical breakdown: singular basis on refactorization";
      return false;
    }
    compute_basic_values();
    return true;
  }

  void finish(SolveResult& result, std::chrono::steady_clock::time_point t0) {
    result.x.assign(static_cast<std::size_t>(n_), 0.0);
    for (int j = 0; j < n_; ++j) result.x[static_cast<std::size_t>(j)] = value_[static_cast<std::size_t>(j)];
    double obj = lp_.obj_offset;
    for (int j = 0; j < n_; ++j) obj += lp_.obj[static_cast<std::size_t>(j)] * value_[static_cast<std::size_t>(j)];
    result.objective = obj;
    if (result.status == SolveStatus::Optimal) result.gap = 0.0;

    // Duals and reduced costs from the final basis.
    std::vector<double> y(static_cast<std::size_t>(m_), 0.0);
    for (int p = 0; p < m_; ++p)
      y[static_cast<std::size_t>(p)] = cost_[static_cast<std::size_t>(basic_[static_cast<std::size_t>(p)])];
    btran(y);
    result.row_duals = y;
    result.reduced_costs.assign(static_cast<std::size_t>(n_), 0.0);
    double dual_obj = lp_.obj_offset;
    for (int j = 0; j < total_; ++j) {
      double r = status_[static_cast<std::size_t>(j)] == VarStatus::Basic
                     ? 0.0
                     : cost_[static_cast<std::size_t>(j)] - dot_column(y, j);
      if (j < n_) result.reduced_costs[static_cast<std::size_t>(j)] = r;
      if (r > opt_.dual_tol && std::isfinite(lower_[static_cast<std::size_t>(j)]))
        dual_obj += r * lower_[static_cast<std::size_t>(j)];
      else if (r < -opt_.dual_tol && std::isfinite(upper_[static_cast<std::size_t>(j)]))
        dual_obj += r * upper_[static_cast<std::size_t>(j)];
    }
    result.dual_objective = dual_obj;

    result.basis.status = status_;
    result.stats.simplex_iterations = iterations_;
    result.stats.refactorizations = refactor_count_;
    result.stats.wall_time_sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }

  struct Eta {
    int pos;
    std::vector<double> d;
  };

  const LinearProgram& lp_;
  const CscMatrix& A_;
  LpOptions opt_;
  int n_, m_, total_;
  long long max_iter_ = 0;
  long long iterations_ = 0;
  long long refactor_count_ = 0;

  std::vector<double> cost_, lower_, upper_, value_;
  std::vector<VarStatus> status_;
  std::vector<int> basic_;
  DenseLU lu_;
  std::vector<Eta> etas_;
};

}  // namespace detail

/// Solves the LP relaxation (integrality marks ignored).
inline SolveResult solve_lp(const LinearProgram& lp, const LpOptions& options = {}) {
  auto report = lp.validate();
  require(report.ok(), "solve_lp: invalid problem:\n", report.to_string());
  if (lp.num_rows() == 0) {
    // Pure bound problem: each variable sits at its cheapest bound.
    SolveResult result;
    result.x.resize(static_cast<std::size_t>(lp.num_cols()));
    double obj = lp.obj_offset;
    for (int j = 0; j < lp.num_cols(); ++j) {
      double c = lp.obj[static_cast<std::size_t>(j)];
      double lo = lp.col_lower[static_cast<std::size_t>(j)];
      double hi = lp.col_upper[static_cast<std::size_t>(j)];
      double v;
      if (c > 0) {
        if (!std::isfinite(lo)) {
          result.status = SolveStatus::Unbounded;
          result.message = "variable " + lp.col_label(j) + " unbounded below";
          return result;
        }
        v = lo;
      } else if (c < 0) {
        if (!std::isfinite(hi)) {
          result.status = SolveStatus::Unbounded;
          result.message = "variable " + lp.col_label(j) + " unbounded above";
          return result;
        }
        v = hi;
      } else {
        v = std::isfinite(lo) ? lo : (std::isfinite(hi) ? hi : 0.0);
      }
      result.x[static_cast<std::size_t>(j)] = v;
      obj += c * v;
    }
    result.objective = obj;
    result.status = SolveStatus::Optimal;
    result.gap = 0.0;
    result.dual_objective = obj;
    return result;
  }
  CscMatrix csc = CscMatrix::from(lp);
  detail::BoundedSimplex simplex(lp, csc, options);
  return simplex.solve();
}

}  // namespace dmsuc
