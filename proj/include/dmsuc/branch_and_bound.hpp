#pragma once

// Best-first branch and bound over the bounded-variable simplex.
//
// Branching picks the most fractional integer variable (ties toward the
// lowest index); nodes are explored best-bound-first with FIFO tie-breaks,
// child LPs warm-start from the parent basis.  Incumbents are polished by
// fixing the integer variables at their rounded values and re-solving the
// continuous part, so reported solutions are clean LP vertices.

#include <chrono>
#include <cmath>
#include <memory>
#include <optional>
#include <queue>
#include <vector>

#include "dmsuc/simplex.hpp"

namespace dmsuc {

struct MilpOptions {
  double mip_gap = 1e-6;          // relative; 0 forces proof of optimality
  double int_tol = 1e-6;          // integrality tolerance on relaxation values
  long long node_limit = -1;      // -1: unlimited
  long long time_limit_ms = -1;   // -1: unlimited (limits break run-to-run determinism)
  bool presolve = true;           // drop rows implied by variable bounds
  LpOptions lp;
  std::optional<std::vector<double>> initial_solution;  // warm incumbent hint
  std::function<void(double)> incumbent_callback;       // fired on every improvement
};

/// Removes rows that can never bind given the variable bounds.  Column set
/// and order are unchanged, so solutions carry over verbatim.
inline LinearProgram presolve_reduce(const LinearProgram& lp, int* removed_rows = nullptr) {
  std::vector<double> act_lo(static_cast<std::size_t>(lp.num_rows()), 0.0);
  std::vector<double> act_hi(static_cast<std::size_t>(lp.num_rows()), 0.0);
  for (std::size_t k = 0; k < lp.a_vals.size(); ++k) {
    int r = lp.a_rows[k];
    double v = lp.a_vals[k];
    double lo = lp.col_lower[static_cast<std::size_t>(lp.a_cols[k])];
    double hi = lp.col_upper[static_cast<std::size_t>(lp.a_cols[k])];
    act_lo[static_cast<std::size_t>(r)] += v > 0 ? v * lo : v * hi;
    act_hi[static_cast<std::size_t>(r)] += v > 0 ? v * hi : v * lo;
  }
  std::vector<char> keep(static_cast<std::size_t>(lp.num_rows()), 1);
  int removed = 0;
  const double margin = 1e-9;
  for (int r = 0; r < lp.num_rows(); ++r) {
    bool lo_redundant = lp.row_lower[static_cast<std::size_t>(r)] == -kInfinity ||
                        act_lo[static_cast<std::size_t>(r)] >=
                            lp.row_lower[static_cast<std::size_t>(r)] + margin;
    bool hi_redundant = lp.row_upper[static_cast<std::size_t>(r)] == kInfinity ||
                        act_hi[static_cast<std::size_t>(r)] <=
                            lp.row_upper[static_cast<std::size_t>(r)] - margin;
    if (lo_redundant && hi_redundant) {
      keep[static_cast<std::size_t>(r)] = 0;
      ++removed;
    }
  }
  if (removed_rows) *removed_rows = removed;
  if (removed == 0) return lp;

  LinearProgram out = lp;
  out.row_lower.clear();
  out.row_upper.clear();
  out.row_names.clear();
  out.a_rows.clear();
  out.a_cols.clear();
  out.a_vals.clear();
  std::vector<int> remap(static_cast<std::size_t>(lp.num_rows()), -1);
  for (int r = 0; r < lp.num_rows(); ++r) {
    if (!keep[static_cast<std::size_t>(r)]) continue;
    remap[static_cast<std::size_t>(r)] = out.add_row(lp.row_lower[static_cast<std::size_t>(r)],
                                                     lp.row_upper[static_cast<std::size_t>(r)],
                                                     lp.row_names[static_cast<std::size_t>(r)]);
  }
  for (std::size_t k = 0; k < lp.a_vals.size(); ++k) {
    int r = remap[static_cast<std::size_t>(lp.a_rows[k])];
    if (r >= 0) out.add_entry(r, lp.a_cols[k], lp.a_vals[k]);
  }
  return out;
}

namespace detail {

struct BnbNode {
  double bound = -kInfinity;
  long long seq = 0;
  // single bound change relative to the parent
  int var = -1;
  double lower = 0.0, upper = 0.0;
  int parent = -1;
  std::shared_ptr<const Basis> warm;
};

struct BnbOrder {
  const std::vector<BnbNode>* arena;
  bool operator()(int a, int b) const {
    const BnbNode& na = (*arena)[static_cast<std::size_t>(a)];
    const BnbNode& nb = (*arena)[static_cast<std::size_t>(b)];
    if (na.bound != nb.bound) return na.bound > nb.bound;  // min-heap on bound
    return na.seq > nb.seq;                                // FIFO on ties
  }
};

}  // namespace detail

/// Branch-and-bound MILP solve.  Integer variables must have finite bounds.
inline SolveResult solve_milp(const LinearProgram& original, const MilpOptions& options = {}) {
  auto t0 = std::chrono::steady_clock::now();
  auto report = original.validate();
  require(report.ok(), "solve_milp: invalid problem:\n", report.to_string());

  LinearProgram lp = options.presolve ? presolve_reduce(original) : original;

  std::vector<int> int_vars;
  for (int j = 0; j < lp.num_cols(); ++j)
    if (lp.is_integer[static_cast<std::size_t>(j)]) int_vars.push_back(j);

  SolveResult best;
  best.status = SolveStatus::LimitReached;
  bool have_incumbent = false;
  long long total_iterations = 0;
  long long nodes_explored = 0;

  auto out_of_time = [&]() {
    if (options.time_limit_ms < 0) return false;
    auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::steady_clock::now() - t0)
                       .count();
    return elapsed >= options.time_limit_ms;
  };

  const std::vector<double> base_lower = lp.col_lower;
  const std::vector<double> base_upper = lp.col_upper;

  // Fixes integers at rounded values and re-solves for the continuous part;
  // gives exact vertex incumbents and verifies the rounding was legitimate.
  auto polish = [&](const std::vector<double>& x, const std::vector<double>& node_lo,
                    const std::vector<double>& node_hi) -> std::optional<SolveResult> {
    lp.col_lower = node_lo;
    lp.col_upper = node_hi;
    for (int j : int_vars) {
      double r = std::round(x[static_cast<std::size_t>(j)]);
      r = std::min(std::max(r, node_lo[static_cast<std::size_t>(j)]), node_hi[static_cast<std::size_t>(j)]);
      lp.col_lower[static_cast<std::size_t>(j)] = r;
      lp.col_upper[static_cast<std::size_t>(j)] = r;
    }
    SolveResult fixed = solve_lp(lp, options.lp);
    total_iterations += fixed.stats.simplex_iterations;
    lp.col_lower = base_lower;
    lp.col_upper = base_upper;
    if (fixed.status != SolveStatus::Optimal) return std::nullopt;
    for (int j : int_vars)
      fixed.x[static_cast<std::size_t>(j)] = std::round(fixed.x[static_cast<std::size_t>(j)]);
    return fixed;
  };

  auto accept_incumbent = [&](SolveResult candidate) {
    if (!have_incumbent || candidate.objective < best.objective) {
      best = std::move(candidate);
      have_incumbent = true;
      if (options.incumbent_callback) options.incumbent_callback(best.objective);
    }
  };

  // Externally supplied warm incumbent.
  if (options.initial_solution &&
      static_cast<int>(options.initial_solution->size()) == lp.num_cols()) {
    bool integral = true;
    for (int j : int_vars) {
      double v = (*options.initial_solution)[static_cast<std::size_t>(j)];
      if (std::fabs(v - std::round(v)) > options.int_tol) {
        integral = false;
        break;
      }
    }
    if (integral) {
      auto polished = polish(*options.initial_solution, base_lower, base_upper);
      if (polished) accept_incumbent(std::move(*polished));
    }
  }

  std::vector<detail::BnbNode> arena;
  detail::BnbOrder order{&arena};
  std::priority_queue<int, std::vector<int>, detail::BnbOrder> open(order);
  long long seq = 0;

  arena.push_back({-kInfinity, seq++, -1, 0.0, 0.0, -1, nullptr});
  open.push(0);

  SolveStatus exit_status = SolveStatus::Optimal;
  std::string exit_message;
  double best_open_bound = -kInfinity;

  std::vector<double> node_lo, node_hi;
  while (!open.empty()) {
    int node_id = open.top();
    const detail::BnbNode node = arena[static_cast<std::size_t>(node_id)];
    best_open_bound = node.bound;

    double prune_tol = have_incumbent
                           ? options.mip_gap * std::max(1.0, std::fabs(best.objective)) +
                                 1e-9 * std::max(1.0, std::fabs(best.objective))
                           : 0.0;
    if (have_incumbent && node.bound >= best.objective - prune_tol) {
      // Best-first order: every remaining node is at least as bad.
      best_open_bound = best.objective;
      exit_status = SolveStatus::Optimal;
      break;
    }
    if (options.node_limit >= 0 && nodes_explored >= options.node_limit) {
      exit_status = SolveStatus::LimitReached;
      exit_message = "node limit reached";
      break;
    }
    if (out_of_time()) {
      exit_status = SolveStatus::LimitReached;
      exit_message = "time limit reached";
      break;
    }
    open.pop();

    // Reconstruct this node's bounds from the change chain.
    node_lo = base_lower;
    node_hi = base_upper;
    for (int walk = node_id; walk > 0; walk = arena[static_cast<std::size_t>(walk)].parent) {
      const detail::BnbNode& step = arena[static_cast<std::size_t>(walk)];
      node_lo[static_cast<std::size_t>(step.var)] =
          std::max(node_lo[static_cast<std::size_t>(step.var)], step.lower);
      node_hi[static_cast<std::size_t>(step.var)] =
          std::min(node_hi[static_cast<std::size_t>(step.var)], step.upper);
    }

    lp.col_lower = node_lo;
    lp.col_upper = node_hi;
    LpOptions lp_options = options.lp;
    if (node.warm) lp_options.warm_start = node.warm.get();
    SolveResult relax = solve_lp(lp, lp_options);
    lp.col_lower = base_lower;
    lp.col_upper = base_upper;
    ++nodes_explored;
    total_iterations += relax.stats.simplex_iterations;

    if (relax.status == SolveStatus::Infeasible) continue;
    if (relax.status == SolveStatus::Unbounded) {
      // With all integers bounded this means the continuous part is
      // unbounded, and so is the MILP.
      best = std::move(relax);
      best.stats.nodes_explored = nodes_explored;
      best.stats.simplex_iterations = total_iterations;
      return best;
    }
    if (relax.status == SolveStatus::LimitReached) {
      exit_status = SolveStatus::LimitReached;
      exit_message = "node LP hit a limit: " + relax.message;
      break;
    }
    if (have_incumbent && relax.objective >= best.objective - prune_tol) continue;

    // Most fractional integer variable, lowest index on ties.
    int branch_var = -1;
    double branch_score = options.int_tol;
    for (int j : int_vars) {
      double v = relax.x[static_cast<std::size_t>(j)];
      double frac = std::fabs(v - std::round(v));
      double score = 0.5 - std::fabs(frac - 0.5);
      if (frac > options.int_tol && score > branch_score) {
        branch_score = score;
        branch_var = j;
      }
    }

    if (branch_var < 0) {
      auto polished = polish(relax.x, node_lo, node_hi);
      if (polished) {
        accept_incumbent(std::move(*polished));
        continue;
      }
      // Rounding was infeasible: split on the first integer with any
      // fractional residue to resolve the tie properly.
      for (int j : int_vars) {
        double v = relax.x[static_cast<std::size_t>(j)];
        if (node_lo[static_cast<std::size_t>(j)] != node_hi[static_cast<std::size_t>(j)] &&
            std::fabs(v - std::round(v)) > 1e-12) {
          branch_var = j;
          break;
        }
      }
      if (branch_var < 0) continue;  // fully fixed and infeasible
    }

    double v = relax.x[static_cast<std::size_t>(branch_var)];
    double floor_v = std::floor(v + options.int_tol);
    auto warm = std::make_shared<const Basis>(std::move(relax.basis));
    detail::BnbNode down{relax.objective, seq++, branch_var, -kInfinity, floor_v, node_id, warm};
    detail::BnbNode up{relax.objective, seq++, branch_var, floor_v + 1.0, kInfinity, node_id, warm};
    arena.push_back(down);
    open.push(static_cast<int>(arena.size()) - 1);
    arena.push_back(up);
    open.push(static_cast<int>(arena.size()) - 1);
  }

  if (open.empty()) {
    best_open_bound = have_incumbent ? best.objective : kInfinity;
    exit_status = have_incumbent ? SolveStatus::Optimal : SolveStatus::Infeasible;
  }

  if (!have_incumbent && exit_status == SolveStatus::Infeasible) {
    best.status = SolveStatus::Infeasible;
    best.message = "no integer-feasible solution";
  } else if (have_incumbent) {
    best.status = exit_status;
    best.message = exit_message;
    double scale = std::max(1.0, std::fabs(best.objective));
    best.gap = exit_status == SolveStatus::Optimal
                   ? 0.0
                   : std::max(0.0, (best.objective - best_open_bound) / scale);
  } else {
    best.status = SolveStatus::LimitReached;
    best.message = exit_message.empty() ? "stopped before any incumbent" : exit_message;
  }
  best.stats.nodes_explored = nodes_explored;
  best.stats.simplex_iterations = total_iterations;
  best.stats.wall_time_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return best;
}

}  // namespace dmsuc
