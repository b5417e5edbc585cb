#pragma once

// Nodal unit-commitment MILP over a scenario tree.
//
// Per (node, generator) the variables are dispatch x, commitment y (binary),
// switch indicators s_on / s_off (relaxed to [0,1]), and the residual
// minimum-up / minimum-down state counters o and d for units whose minimum
// times exceed one stage.  The state dynamics:
//
//   startup   pins o to min_up-1 exactly (o >= s_on*(On-1), o <= o_parent +
//             s_on*(On-1));
//   while on  o may only step down by one (o >= o_parent - y), and the
//             o/On objective term drives it down;
//   o <= (On-1)*y couples the counter to the commitment, which makes
//             switching off with a positive counter infeasible rather than
//             merely expensive;
//   o_parent - o <= y keeps the unit committed while the counter decreases.
//
// The minimum-down side mirrors this with d, s_off and (1-y).  All state
// and switching constraints are applied at the root as well, against the
// carried initial state (y0-, o0-, d0-), which is what makes commitment
// continuity hold across decision epochs.
//
// Ramping keeps the upper side x_v - x_parent <= RU * y_v; the lower side
// uses the parent commitment, x_parent - x_v <= RD * y_parent, so a unit can
// ramp down to zero on the stage it switches off (multiplying by y_v instead
// would forbid every shutdown from a positive operating point).

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dmsuc/branch_and_bound.hpp"
#include "dmsuc/power_system.hpp"
#include "dmsuc/scenario_tree.hpp"

namespace dmsuc {

/// Commitment state of one generator at an epoch boundary.
struct GenCommit {
  int on = 0;        // y: 0 or 1
  int res_up = 0;    // o: stages the unit must still stay on
  int res_down = 0;  // d: stages the unit must still stay off
};

struct CommitState {
  std::vector<GenCommit> per_gen;

  static CommitState cold(int num_gens) { return {std::vector<GenCommit>(static_cast<std::size_t>(num_gens))}; }

  ValidationReport validate(const std::vector<Generator>& gens) const {
    ValidationReport report;
    if (per_gen.size() != gens.size()) {
      report.add("size", "state covers " + std::to_string(per_gen.size()) + " generators, system has " +
                             std::to_string(gens.size()));
      return report;
    }
    for (std::size_t g = 0; g < gens.size(); ++g) {
      const GenCommit& s = per_gen[g];
      const std::string& id = gens[g].id;
      if (s.on != 0 && s.on != 1) report.add("on_binary", "generator " + id + ": on must be 0/1");
      if (s.res_up < 0 || s.res_down < 0)
        report.add("res_sign", "generator " + id + ": residual times must be >= 0");
      if (s.res_up > 0 && s.on != 1)
        report.add("res_up_on", "generator " + id + ": res_up > 0 requires on = 1");
      if (s.res_down > 0 && s.on != 0)
        report.add("res_down_off", "generator " + id + ": res_down > 0 requires on = 0");
      if (s.res_up > gens[g].min_up - 1)
        report.add("res_up_range", "generator " + id + ": res_up exceeds min_up - 1");
      if (s.res_down > gens[g].min_down - 1)
        report.add("res_down_range", "generator " + id + ": res_down exceeds min_down - 1");
    }
    return report;
  }
};

struct UCInstance {
  PowerSystem system;
  ScenarioTree tree;
  CommitState init;
  /// Dispatch carried into the root ramp constraint; empty means all zeros.
  std::vector<double> init_dispatch;

  ValidationReport validate() const {
    ValidationReport report = system.validate();
    auto tree_report = tree.validate();
    for (auto& issue : tree_report.issues) report.add(issue.code, "tree: " + issue.message);
    auto state_report = init.validate(system.generators);
    for (auto& issue : state_report.issues) report.add(issue.code, "init: " + issue.message);
    if (!init_dispatch.empty() && init_dispatch.size() != system.generators.size())
      report.add("init_dispatch", "init_dispatch must be empty or one value per generator");
    return report;
  }
};

/// Column indices of the UC variables, -1 where a variable is not emitted.
struct UcVarMap {
  int num_nodes = 0, num_gens = 0;
  std::vector<int> x, y, s_on, s_off, o, d;  // indexed [v * num_gens + g]

  int at(const std::vector<int>& which, NodeId v, int g) const {
    return which[static_cast<std::size_t>(v) * static_cast<std::size_t>(num_gens) + static_cast<std::size_t>(g)];
  }
};

struct UcMilp {
  LinearProgram lp;
  UcVarMap map;
  std::vector<double> node_prob;
};

/// Builds the nodal MILP.  No solving happens here.
inline UcMilp build_milp(const UCInstance& instance) {
  auto report = instance.validate();
  require(report.ok(), "build_milp: invalid instance:\n", report.to_string());

  const ScenarioTree& tree = instance.tree;
  const PowerSystem& sys = instance.system;
  const int V = tree.size();
  const int G = sys.num_generators();

  UcMilp out;
  out.map.num_nodes = V;
  out.map.num_gens = G;
  auto& map = out.map;
  const std::size_t cells = static_cast<std::size_t>(V) * static_cast<std::size_t>(G);
  map.x.assign(cells, -1);
  map.y.assign(cells, -1);
  map.s_on.assign(cells, -1);
  map.s_off.assign(cells, -1);
  map.o.assign(cells, -1);
  map.d.assign(cells, -1);

  out.node_prob.resize(static_cast<std::size_t>(V));
  for (NodeId v = 0; v < V; ++v) out.node_prob[static_cast<std::size_t>(v)] = tree.path_probability(v);

  LinearProgram& lp = out.lp;
  auto cell = [&](NodeId v, int g) {
    return static_cast<std::size_t>(v) * static_cast<std::size_t>(G) + static_cast<std::size_t>(g);
  };
  auto tag = [](const char* kind, NodeId v, int g) {
    return std::string(kind) + "[" + std::to_string(v) + "," + std::to_string(g) + "]";
  };

  for (NodeId v = 0; v < V; ++v) {
    double prob = out.node_prob[static_cast<std::size_t>(v)];
    for (int g = 0; g < G; ++g) {
      const Generator& gen = sys.generators[static_cast<std::size_t>(g)];
      map.x[cell(v, g)] = lp.add_col(0.0, gen.p_max, prob * gen.c1, false, tag("x", v, g));
      map.y[cell(v, g)] = lp.add_col(0.0, 1.0, prob * gen.c0, true, tag("y", v, g));
      map.s_on[cell(v, g)] = lp.add_col(0.0, 1.0, prob * gen.startup_cost, false, tag("s_on", v, g));
      map.s_off[cell(v, g)] = lp.add_col(0.0, 1.0, prob * gen.shutdown_cost, false, tag("s_off", v, g));
      if (gen.min_up > 1)
        map.o[cell(v, g)] = lp.add_col(0.0, gen.min_up - 1.0, prob / gen.min_up, false, tag("o", v, g));
      if (gen.min_down > 1)
        map.d[cell(v, g)] = lp.add_col(0.0, gen.min_down - 1.0, prob / gen.min_down, false, tag("d", v, g));
    }
  }

  // Flow sensitivities folded with the load shares: the load term of line l
  // is xi_v * sum_b ptdf[l][b] * share_b.
  const auto& ptdf = sys.network.ptdf;
  std::vector<double> load_sens(ptdf.size(), 0.0);
  std::vector<std::vector<double>> gen_sens(ptdf.size(), std::vector<double>(static_cast<std::size_t>(G), 0.0));
  for (std::size_t l = 0; l < ptdf.size(); ++l) {
    for (std::size_t b = 0; b < sys.network.buses.size(); ++b)
      load_sens[l] += ptdf[l][b] * sys.network.buses[b].load_share;
    for (int g = 0; g < G; ++g)
      gen_sens[l][static_cast<std::size_t>(g)] =
          ptdf[l][static_cast<std::size_t>(sys.network.bus_index(sys.generators[static_cast<std::size_t>(g)].bus))];
  }

  for (NodeId v = 0; v < V; ++v) {
    const double load = tree.node(v).value;
    const NodeId parent = tree.node(v).parent;
    const bool root = parent < 0;

    // (7c) system balance
    int bal = lp.add_row(load, load, "balance[" + std::to_string(v) + "]");
    for (int g = 0; g < G; ++g) lp.add_entry(bal, map.x[cell(v, g)], 1.0);

    // (7d) line flows as range rows
    for (std::size_t l = 0; l < ptdf.size(); ++l) {
      double limit = sys.network.lines[l].limit;
      double shift = load_sens[l] * load;
      int row = lp.add_row(-limit + shift, limit + shift,
                           "flow[" + std::to_string(v) + "," + std::to_string(l) + "]");
      for (int g = 0; g < G; ++g) {
        double coeff = gen_sens[l][static_cast<std::size_t>(g)];
        if (coeff != 0.0) lp.add_entry(row, map.x[cell(v, g)], coeff);
      }
    }

    for (int g = 0; g < G; ++g) {
      const Generator& gen = sys.generators[static_cast<std::size_t>(g)];
      const GenCommit& init = instance.init.per_gen[static_cast<std::size_t>(g)];
      const double y0 = init.on;
      const double o0 = init.res_up;
      const double d0 = init.res_down;
      const double x0 = instance.init_dispatch.empty()
                            ? 0.0
                            : instance.init_dispatch[static_cast<std::size_t>(g)];

      int xv = map.x[cell(v, g)];
      int yv = map.y[cell(v, g)];
      int sv = map.s_on[cell(v, g)];
      int zv = map.s_off[cell(v, g)];

      // (7m) capacity linking
      int cap_lo = lp.add_row(0.0, kInfinity, tag("cap_lo", v, g));
      lp.add_entry(cap_lo, xv, 1.0);
      lp.add_entry(cap_lo, yv, -gen.p_min);
      int cap_hi = lp.add_row(-kInfinity, 0.0, tag("cap_hi", v, g));
      lp.add_entry(cap_hi, xv, 1.0);
      lp.add_entry(cap_hi, yv, -gen.p_max);

      // (7n) ramping
      int ramp_up = lp.add_row(-kInfinity, root ? x0 : 0.0, tag("ramp_up", v, g));
      lp.add_entry(ramp_up, xv, 1.0);
      lp.add_entry(ramp_up, yv, -gen.ramp_up);
      if (!root) lp.add_entry(ramp_up, map.x[cell(parent, g)], -1.0);
      int ramp_dn = lp.add_row(root ? x0 - gen.ramp_down * y0 : 0.0, kInfinity,
                               tag("ramp_dn", v, g));
      lp.add_entry(ramp_dn, xv, 1.0);
      if (!root) {
        lp.add_entry(ramp_dn, map.x[cell(parent, g)], -1.0);
        lp.add_entry(ramp_dn, map.y[cell(parent, g)], gen.ramp_down);
      }

      // (7k)-(7l) switching
      int sw_on = lp.add_row(root ? -y0 : 0.0, kInfinity, tag("switch_on", v, g));
      lp.add_entry(sw_on, sv, 1.0);
      lp.add_entry(sw_on, yv, -1.0);
      if (!root) lp.add_entry(sw_on, map.y[cell(parent, g)], 1.0);
      int sw_id = lp.add_row(root ? y0 : 0.0, root ? y0 : 0.0, tag("switch_id", v, g));
      lp.add_entry(sw_id, zv, 1.0);
      lp.add_entry(sw_id, yv, 1.0);
      lp.add_entry(sw_id, sv, -1.0);
      if (!root) lp.add_entry(sw_id, map.y[cell(parent, g)], -1.0);

      // (7e)-(7g) minimum-up state dynamics
      if (gen.min_up > 1) {
        int ov = map.o[cell(v, g)];
        int op = root ? -1 : map.o[cell(parent, g)];
        double span = gen.min_up - 1.0;
        int up_set = lp.add_row(0.0, kInfinity, tag("up_set", v, g));
        lp.add_entry(up_set, ov, 1.0);
        lp.add_entry(up_set, sv, -span);
        int up_dec = lp.add_row(root ? o0 : 0.0, kInfinity, tag("up_dec", v, g));
        lp.add_entry(up_dec, ov, 1.0);
        lp.add_entry(up_dec, yv, 1.0);
        if (!root) lp.add_entry(up_dec, op, -1.0);
        int up_ub = lp.add_row(-kInfinity, root ? o0 : 0.0, tag("up_ub", v, g));
        lp.add_entry(up_ub, ov, 1.0);
        lp.add_entry(up_ub, sv, -span);
        if (!root) lp.add_entry(up_ub, op, -1.0);
        int up_mono = lp.add_row(root ? -o0 : 0.0, kInfinity, tag("up_mono", v, g));
        lp.add_entry(up_mono, ov, 1.0);
        lp.add_entry(up_mono, yv, 1.0);
        if (!root) lp.add_entry(up_mono, op, -1.0);
        int up_cap = lp.add_row(-kInfinity, 0.0, tag("up_cap", v, g));
        lp.add_entry(up_cap, ov, 1.0);
        lp.add_entry(up_cap, yv, -span);
      }

      // (7h)-(7j) minimum-down state dynamics
      if (gen.min_down > 1) {
        int dv = map.d[cell(v, g)];
        int dp = root ? -1 : map.d[cell(parent, g)];
        double span = gen.min_down - 1.0;
        int dn_set = lp.add_row(0.0, kInfinity, tag("dn_set", v, g));
        lp.add_entry(dn_set, dv, 1.0);
        lp.add_entry(dn_set, zv, -span);
        int dn_dec = lp.add_row(root ? d0 - 1.0 : -1.0, kInfinity, tag("dn_dec", v, g));
        lp.add_entry(dn_dec, dv, 1.0);
        lp.add_entry(dn_dec, yv, -1.0);
        if (!root) lp.add_entry(dn_dec, dp, -1.0);
        int dn_ub = lp.add_row(-kInfinity, root ? d0 : 0.0, tag("dn_ub", v, g));
        lp.add_entry(dn_ub, dv, 1.0);
        lp.add_entry(dn_ub, zv, -span);
        if (!root) lp.add_entry(dn_ub, dp, -1.0);
        int dn_mono = lp.add_row(-kInfinity, root ? 1.0 + d0 : 1.0, tag("dn_mono", v, g));
        lp.add_entry(dn_mono, yv, 1.0);
        lp.add_entry(dn_mono, dv, 1.0);
        if (!root) lp.add_entry(dn_mono, dp, -1.0);
        int dn_cap = lp.add_row(-kInfinity, span, tag("dn_cap", v, g));
        lp.add_entry(dn_cap, dv, 1.0);
        lp.add_entry(dn_cap, yv, span);
      }
    }
  }
  return out;
}

// --- solutions ----------------------------------------------------------------

struct NodeCosts {
  double startup = 0, shutdown = 0, energy = 0, commitment = 0, up_reg = 0, down_reg = 0;
  double total() const { return startup + shutdown + energy + commitment + up_reg + down_reg; }
};

struct UCSolution {
  // [node][generator] primal values; o and d are zero for units without
  // state counters.
  std::vector<std::vector<double>> x, y, s_on, s_off, o, d;
  std::vector<NodeCosts> nodal;    // per node
  std::vector<double> node_prob;   // pi_v
  double objective = 0.0;          // sum_v pi_v * nodal total
  SolveStatus status = SolveStatus::LimitReached;
  double gap = kInfinity;
  std::string solve_mode;          // "branch-and-bound" or "heuristic"
  SolveStats stats;

  int num_nodes() const { return static_cast<int>(x.size()); }
  int num_gens() const { return x.empty() ? 0 : static_cast<int>(x.front().size()); }
};

/// Cost breakdown of one node from raw primal values.
inline NodeCosts nodal_cost(const UCSolution& solution, const PowerSystem& sys, NodeId v) {
  NodeCosts costs;
  for (int g = 0; g < solution.num_gens(); ++g) {
    const Generator& gen = sys.generators[static_cast<std::size_t>(g)];
    const std::size_t vi = static_cast<std::size_t>(v), gi = static_cast<std::size_t>(g);
    costs.startup += gen.startup_cost * solution.s_on[vi][gi];
    costs.shutdown += gen.shutdown_cost * solution.s_off[vi][gi];
    costs.energy += gen.c1 * solution.x[vi][gi];
    costs.commitment += gen.c0 * solution.y[vi][gi];
    if (gen.min_up > 1) costs.up_reg += solution.o[vi][gi] / gen.min_up;
    if (gen.min_down > 1) costs.down_reg += solution.d[vi][gi] / gen.min_down;
  }
  return costs;
}

/// Unpacks a solver result into per-node values and recomputes the objective
/// as sum_v pi_v * total(v), which ties the reported objective bit-for-bit to
/// the nodal cost breakdown.
inline UCSolution extract_solution(const UcMilp& milp, const UCInstance& instance,
                                   const SolveResult& raw) {
  const int V = milp.map.num_nodes;
  const int G = milp.map.num_gens;
  UCSolution sol;
  sol.status = raw.status;
  sol.gap = raw.gap;
  sol.stats = raw.stats;
  sol.node_prob = milp.node_prob;
  auto grab = [&](const std::vector<int>& idx, NodeId v, int g) {
    int j = milp.map.at(idx, v, g);
    return j < 0 ? 0.0 : raw.x[static_cast<std::size_t>(j)];
  };
  sol.x.resize(static_cast<std::size_t>(V));
  sol.y.resize(static_cast<std::size_t>(V));
  sol.s_on.resize(static_cast<std::size_t>(V));
  sol.s_off.resize(static_cast<std::size_t>(V));
  sol.o.resize(static_cast<std::size_t>(V));
  sol.d.resize(static_cast<std::size_t>(V));
  for (NodeId v = 0; v < V; ++v) {
    const std::size_t vi = static_cast<std::size_t>(v);
    sol.x[vi].resize(static_cast<std::size_t>(G));
    sol.y[vi].resize(static_cast<std::size_t>(G));
    sol.s_on[vi].resize(static_cast<std::size_t>(G));
    sol.s_off[vi].resize(static_cast<std::size_t>(G));
    sol.o[vi].resize(static_cast<std::size_t>(G));
    sol.d[vi].resize(static_cast<std::size_t>(G));
    for (int g = 0; g < G; ++g) {
      const std::size_t gi = static_cast<std::size_t>(g);
      sol.x[vi][gi] = grab(milp.map.x, v, g);
      sol.y[vi][gi] = std::round(grab(milp.map.y, v, g));
      sol.s_on[vi][gi] = grab(milp.map.s_on, v, g);
      sol.s_off[vi][gi] = grab(milp.map.s_off, v, g);
      sol.o[vi][gi] = grab(milp.map.o, v, g);
      sol.d[vi][gi] = grab(milp.map.d, v, g);
    }
  }
  sol.nodal.resize(static_cast<std::size_t>(V));
  sol.objective = 0.0;
  for (NodeId v = 0; v < V; ++v) {
    sol.nodal[static_cast<std::size_t>(v)] = nodal_cost(sol, instance.system, v);
    sol.objective += sol.node_prob[static_cast<std::size_t>(v)] * sol.nodal[static_cast<std::size_t>(v)].total();
  }
  return sol;
}

// --- semantic feasibility check -------------------------------------------------

/// Re-checks every constraint family directly from the instance data,
/// independent of the LP that produced the solution.  Violations beyond
/// `tol` (absolute) are reported with node, generator, and family.
inline ValidationReport check_feasibility(const UCSolution& sol, const UCInstance& instance,
                                          double tol = 1e-6) {
  ValidationReport report;
  const ScenarioTree& tree = instance.tree;
  const PowerSystem& sys = instance.system;
  const int G = sys.num_generators();

  auto flag = [&](const std::string& family, NodeId v, int g, double slack) {
    report.add(family, "node " + std::to_string(v) +
                           (g >= 0 ? ", generator " + sys.generators[static_cast<std::size_t>(g)].id : "") +
                           ": violated by " + std::to_string(slack));
  };

  const auto& ptdf = sys.network.ptdf;
  std::vector<double> load_sens(ptdf.size(), 0.0);
  for (std::size_t l = 0; l < ptdf.size(); ++l)
    for (std::size_t b = 0; b < sys.network.buses.size(); ++b)
      load_sens[l] += ptdf[l][b] * sys.network.buses[b].load_share;

  for (NodeId v = 0; v < tree.size(); ++v) {
    const std::size_t vi = static_cast<std::size_t>(v);
    const NodeId parent = tree.node(v).parent;
    const double load = tree.node(v).value;

    double total_x = 0.0;
    for (int g = 0; g < G; ++g) total_x += sol.x[vi][static_cast<std::size_t>(g)];
    if (std::fabs(total_x - load) > tol) flag("balance", v, -1, std::fabs(total_x - load));

    for (std::size_t l = 0; l < ptdf.size(); ++l) {
      double flow = -load_sens[l] * load;
      for (int g = 0; g < G; ++g)
        flow += ptdf[l][static_cast<std::size_t>(
                    sys.network.bus_index(sys.generators[static_cast<std::size_t>(g)].bus))] *
                sol.x[vi][static_cast<std::size_t>(g)];
      double limit = sys.network.lines[l].limit;
      if (flow > limit + tol) flag("flow", v, -1, flow - limit);
      if (flow < -limit - tol) flag("flow", v, -1, -limit - flow);
    }

    for (int g = 0; g < G; ++g) {
      const std::size_t gi = static_cast<std::size_t>(g);
      const Generator& gen = sys.generators[gi];
      const GenCommit& init = instance.init.per_gen[gi];
      double y = sol.y[vi][gi], x = sol.x[vi][gi];
      double s_on = sol.s_on[vi][gi], s_off = sol.s_off[vi][gi];
      double o = sol.o[vi][gi], d = sol.d[vi][gi];
      bool root = parent < 0;
      double yp = root ? init.on : sol.y[static_cast<std::size_t>(parent)][gi];
      double op = root ? init.res_up : sol.o[static_cast<std::size_t>(parent)][gi];
      double dp = root ? init.res_down : sol.d[static_cast<std::size_t>(parent)][gi];
      double xp = root ? (instance.init_dispatch.empty() ? 0.0 : instance.init_dispatch[gi])
                       : sol.x[static_cast<std::size_t>(parent)][gi];

      if (std::fabs(y - std::round(y)) > tol) flag("binary", v, g, std::fabs(y - std::round(y)));
      if (s_on < -tol || s_on > 1 + tol) flag("switch_range", v, g, s_on);
      if (s_off < -tol || s_off > 1 + tol) flag("switch_range", v, g, s_off);
      if (x < gen.p_min * y - tol) flag("capacity", v, g, gen.p_min * y - x);
      if (x > gen.p_max * y + tol) flag("capacity", v, g, x - gen.p_max * y);
      if (x - xp > gen.ramp_up * y + tol) flag("ramping", v, g, x - xp - gen.ramp_up * y);
      if (xp - x > gen.ramp_down * yp + tol) flag("ramping", v, g, xp - x - gen.ramp_down * yp);
      if (s_on < y - yp - tol) flag("switching", v, g, y - yp - s_on);
      if (std::fabs(s_off - (yp - y + s_on)) > tol)
        flag("switching", v, g, std::fabs(s_off - (yp - y + s_on)));

      if (gen.min_up > 1) {
        double span = gen.min_up - 1.0;
        if (o < -tol || o > span + tol) flag("min_up", v, g, o);
        if (o < s_on * span - tol) flag("min_up", v, g, s_on * span - o);
        if (o < op - y - tol) flag("min_up", v, g, op - y - o);
        if (o > op + s_on * span + tol) flag("min_up", v, g, o - op - s_on * span);
        if (op - o > y + tol) flag("min_up", v, g, op - o - y);
        if (o > span * y + tol) flag("min_up", v, g, o - span * y);
      }
      if (gen.min_down > 1) {
        double span = gen.min_down - 1.0;
        if (d < -tol || d > span + tol) flag("min_down", v, g, d);
        if (d < s_off * span - tol) flag("min_down", v, g, s_off * span - d);
        if (d < dp - 1.0 + y - tol) flag("min_down", v, g, dp - 1.0 + y - d);
        if (d > dp + s_off * span + tol) flag("min_down", v, g, d - dp - s_off * span);
        if (y > 1.0 - d + dp + tol) flag("min_down", v, g, y - (1.0 - d + dp));
        if (d > span * (1.0 - y) + tol) flag("min_down", v, g, d - span * (1.0 - y));
      }
    }
  }
  return report;
}

// --- scenario expansion -----------------------------------------------------------

struct DecisionTrajectory {
  NodeId leaf = -1;
  std::vector<NodeId> nodes;                 // root..leaf
  std::vector<std::vector<double>> x, y;     // [stage][generator]
};

/// One decision trajectory per leaf; trajectories of leaves sharing a history
/// agree on that prefix because they read the same nodes.
inline std::vector<DecisionTrajectory> expand_to_scenarios(const UCSolution& sol,
                                                           const ScenarioTree& tree) {
  std::vector<DecisionTrajectory> out;
  for (NodeId leaf : tree.leaves()) {
    DecisionTrajectory traj;
    traj.leaf = leaf;
    auto path = tree.path_to(leaf);
    traj.nodes = path.node_ids;
    for (NodeId v : path.node_ids) {
      traj.x.push_back(sol.x[static_cast<std::size_t>(v)]);
      traj.y.push_back(sol.y[static_cast<std::size_t>(v)]);
    }
    out.push_back(std::move(traj));
  }
  return out;
}

// --- commitment state extraction ----------------------------------------------------

/// Reads (y, o, d) for every generator at `node`, rounding the state
/// counters to integers.  Drift beyond 1e-4 from an integer is reported in
/// `warnings` (when provided) but still rounded.
inline CommitState commit_state_at(const UCSolution& sol, const PowerSystem& sys, NodeId node,
                                   std::vector<std::string>* warnings = nullptr) {
  CommitState state;
  const std::size_t vi = static_cast<std::size_t>(node);
  for (int g = 0; g < sol.num_gens(); ++g) {
    const std::size_t gi = static_cast<std::size_t>(g);
    GenCommit c;
    c.on = sol.y[vi][gi] > 0.5 ? 1 : 0;
    auto round_counter = [&](double value, const char* kind) {
      double rounded = std::round(value);
      if (std::fabs(value - rounded) > 1e-4 && warnings)
        warnings->push_back("generator " + sys.generators[gi].id + ": " + kind + " state " +
                            std::to_string(value) + " rounded to " + std::to_string(rounded));
      return static_cast<int>(rounded);
    };
    c.res_up = round_counter(sol.o[vi][gi], "res_up");
    c.res_down = round_counter(sol.d[vi][gi], "res_down");
    if (c.on == 1) c.res_down = 0;
    if (c.on == 0) c.res_up = 0;
    state.per_gen.push_back(c);
  }
  return state;
}

// --- priority commitment heuristic ----------------------------------------------------

/// Greedy stage-wise commitment: serve the per-stage worst-case load with the
/// cheapest units, keeping each unit's pattern monotone (one switch at most)
/// so the minimum-up/down rules hold by construction.  Returns a full-length
/// variable vector with the y columns filled, or nothing when the greedy
/// cannot cover the load.
inline std::optional<std::vector<double>> uc_commitment_pattern(const UCInstance& instance,
                                                                const UcMilp& milp,
                                                                double capacity_margin = 1.0) {
  const ScenarioTree& tree = instance.tree;
  const PowerSystem& sys = instance.system;
  const int G = sys.num_generators();
  const int T = tree.depth();

  std::vector<double> stage_max(static_cast<std::size_t>(T), -kInfinity);
  std::vector<double> stage_min(static_cast<std::size_t>(T), kInfinity);
  for (const auto& nd : tree.nodes()) {
    stage_max[static_cast<std::size_t>(nd.stage)] = std::max(stage_max[static_cast<std::size_t>(nd.stage)], nd.value);
    stage_min[static_cast<std::size_t>(nd.stage)] = std::min(stage_min[static_cast<std::size_t>(nd.stage)], nd.value);
  }

  std::vector<int> merit(static_cast<std::size_t>(G));
  for (int g = 0; g < G; ++g) merit[static_cast<std::size_t>(g)] = g;
  std::sort(merit.begin(), merit.end(), [&](int a, int b) {
    const auto& ga = sys.generators[static_cast<std::size_t>(a)];
    const auto& gb = sys.generators[static_cast<std::size_t>(b)];
    if (ga.c1 != gb.c1) return ga.c1 < gb.c1;
    return a < b;
  });

  // u[g][t]: stage-wise commitment, same across the nodes of a stage.
  std::vector<std::vector<char>> u(static_cast<std::size_t>(G), std::vector<char>(static_cast<std::size_t>(T), 0));
  std::vector<int> allowed_on_from(static_cast<std::size_t>(G), 0);
  std::vector<char> switched_off(static_cast<std::size_t>(G), 0);  // on->off happened; no rejoin
  for (int g = 0; g < G; ++g) {
    const GenCommit& init = instance.init.per_gen[static_cast<std::size_t>(g)];
    const Generator& gen = sys.generators[static_cast<std::size_t>(g)];
    if (init.on == 1) {
      for (int t = 0; t < std::min(init.res_up, T); ++t) u[static_cast<std::size_t>(g)][static_cast<std::size_t>(t)] = 1;
      // turning it off at any point bars a later restart within this horizon
      allowed_on_from[static_cast<std::size_t>(g)] = 0;
      (void)gen;
    } else {
      allowed_on_from[static_cast<std::size_t>(g)] = init.res_down;
    }
  }

  auto min_gen_ok = [&](int candidate, int from_stage) {
    for (int t = from_stage; t < T; ++t) {
      double committed_min = 0.0;
      for (int g = 0; g < G; ++g)
        if (u[static_cast<std::size_t>(g)][static_cast<std::size_t>(t)])
          committed_min += sys.generators[static_cast<std::size_t>(g)].p_min;
      committed_min += sys.generators[static_cast<std::size_t>(candidate)].p_min;
      if (committed_min > stage_min[static_cast<std::size_t>(t)] + 1e-9) return false;
    }
    return true;
  };

  for (int t = 0; t < T; ++t) {
    auto capacity_at = [&](int stage) {
      double cap = 0.0;
      for (int g = 0; g < G; ++g)
        if (u[static_cast<std::size_t>(g)][static_cast<std::size_t>(stage)])
          cap += sys.generators[static_cast<std::size_t>(g)].p_max;
      return cap;
    };
    double needed = capacity_margin * stage_max[static_cast<std::size_t>(t)];
    for (int mi = 0; mi < G && capacity_at(t) < needed; ++mi) {
      int g = merit[static_cast<std::size_t>(mi)];
      if (u[static_cast<std::size_t>(g)][static_cast<std::size_t>(t)]) continue;
      // a unit that already went on->off may not rejoin (its minimum-down
      // bookkeeping is not tracked past the switch)
      if (switched_off[static_cast<std::size_t>(g)]) continue;
      if (t < allowed_on_from[static_cast<std::size_t>(g)]) continue;
      if (!min_gen_ok(g, t)) continue;
      for (int tau = t; tau < T; ++tau) u[static_cast<std::size_t>(g)][static_cast<std::size_t>(tau)] = 1;
    }
    for (int g = 0; g < G; ++g) {
      bool prev = (t == 0) ? instance.init.per_gen[static_cast<std::size_t>(g)].on == 1
                           : u[static_cast<std::size_t>(g)][static_cast<std::size_t>(t - 1)] == 1;
      if (prev && !u[static_cast<std::size_t>(g)][static_cast<std::size_t>(t)])
        switched_off[static_cast<std::size_t>(g)] = 1;
    }
    if (capacity_at(t) < stage_max[static_cast<std::size_t>(t)] - 1e-9) return std::nullopt;
    double committed_min = 0.0;
    for (int g = 0; g < G; ++g)
      if (u[static_cast<std::size_t>(g)][static_cast<std::size_t>(t)])
        committed_min += sys.generators[static_cast<std::size_t>(g)].p_min;
    if (committed_min > stage_min[static_cast<std::size_t>(t)] + 1e-9) return std::nullopt;
  }

  std::vector<double> values(static_cast<std::size_t>(milp.lp.num_cols()), 0.0);
  for (NodeId v = 0; v < tree.size(); ++v) {
    int stage = tree.node(v).stage;
    for (int g = 0; g < G; ++g)
      values[static_cast<std::size_t>(milp.map.at(milp.map.y, v, g))] =
          u[static_cast<std::size_t>(g)][static_cast<std::size_t>(stage)];
  }
  return values;
}

/// Solves the dispatch LP with the commitment pattern fixed; used above the
/// exact-solver size threshold and as the warm incumbent below it.
inline SolveResult uc_heuristic_solve(const UcMilp& milp, const std::vector<double>& pattern,
                                      const LpOptions& lp_options = {}) {
  LinearProgram fixed = milp.lp;
  for (int j = 0; j < fixed.num_cols(); ++j) {
    if (!fixed.is_integer[static_cast<std::size_t>(j)]) continue;
    double v = std::round(pattern[static_cast<std::size_t>(j)]);
    fixed.col_lower[static_cast<std::size_t>(j)] = v;
    fixed.col_upper[static_cast<std::size_t>(j)] = v;
  }
  LinearProgram reduced = presolve_reduce(fixed);
  SolveResult result = solve_lp(reduced, lp_options);
  return result;
}

/// Pattern search plus dispatch solve, widening the capacity margin until a
/// feasible schedule appears.  The returned vector has the heuristic y
/// pattern stitched back over the dispatch values.
inline std::optional<SolveResult> uc_heuristic_schedule(const UCInstance& instance,
                                                        const UcMilp& milp,
                                                        const LpOptions& lp_options = {}) {
  for (double margin : {1.0, 1.1, 1.25}) {
    auto pattern = uc_commitment_pattern(instance, milp, margin);
    if (!pattern) continue;
    SolveResult dispatch = uc_heuristic_solve(milp, *pattern, lp_options);
    if (dispatch.status != SolveStatus::Optimal) continue;
    for (int j = 0; j < milp.lp.num_cols(); ++j)
      if (milp.lp.is_integer[static_cast<std::size_t>(j)])
        dispatch.x[static_cast<std::size_t>(j)] = std::round((*pattern)[static_cast<std::size_t>(j)]);
    return dispatch;
  }
  return std::nullopt;
}

// --- end-to-end solve with the scale policy ---------------------------------------------

struct UcSolveOptions {
  MilpOptions milp;
  /// Above this binary count the exact search is skipped and the priority
  /// heuristic provides the schedule (export MPS for an external solver).
  int binary_threshold = 200;
  bool use_heuristic_hint = true;
};

inline UCSolution solve_uc(const UCInstance& instance, const UcSolveOptions& options = {}) {
  UcMilp milp = build_milp(instance);
  int binaries = milp.lp.num_integers();

  if (binaries > options.binary_threshold) {
    auto dispatch = uc_heuristic_schedule(instance, milp, options.milp.lp);
    if (!dispatch)
      fail("solve_uc: ", binaries, " binaries exceed the internal-solver threshold and the ",
           "priority heuristic found no feasible commitment; export the MPS and use an external solver");
    dispatch->status = SolveStatus::LimitReached;
    dispatch->gap = kInfinity;
    dispatch->message = std::to_string(binaries) +
                        " binaries exceed the internal-solver threshold; priority-heuristic "
                        "schedule returned (export MPS for an exact solve)";
    UCSolution sol = extract_solution(milp, instance, *dispatch);
    sol.solve_mode = "heuristic";
    return sol;
  }

  MilpOptions milp_options = options.milp;
  if (options.use_heuristic_hint && !milp_options.initial_solution) {
    auto pattern = uc_commitment_pattern(instance, milp);
    if (pattern) milp_options.initial_solution = std::move(*pattern);
  }
  SolveResult raw = solve_milp(milp.lp, milp_options);
  require(raw.status != SolveStatus::Unbounded, "solve_uc: model is unbounded (malformed input)");
  if (raw.status == SolveStatus::Infeasible) fail("solve_uc: MILP infeasible");
  require(!raw.x.empty(), "solve_uc: no incumbent within limits (", raw.message, ")");
  UCSolution sol = extract_solution(milp, instance, raw);
  sol.solve_mode = "branch-and-bound";
  return sol;
}

// --- solution serialization ----------------------------------------------------------

inline nlohmann::json solution_to_json(const UCSolution& sol, const UCInstance& instance) {
  nlohmann::json j;
  j["objective"] = sol.objective;
  j["status"] = to_string(sol.status);
  j["solve_mode"] = sol.solve_mode;
  if (std::isfinite(sol.gap)) j["gap"] = sol.gap;
  nlohmann::json nodes = nlohmann::json::array();
  for (NodeId v = 0; v < sol.num_nodes(); ++v) {
    const std::size_t vi = static_cast<std::size_t>(v);
    nlohmann::json gens = nlohmann::json::array();
    for (int g = 0; g < sol.num_gens(); ++g) {
      const std::size_t gi = static_cast<std::size_t>(g);
      gens.push_back({{"gen", instance.system.generators[gi].id},
                      {"y", sol.y[vi][gi]},
                      {"x", sol.x[vi][gi]},
                      {"s_on", sol.s_on[vi][gi]},
                      {"s_off", sol.s_off[vi][gi]},
                      {"o", sol.o[vi][gi]},
                      {"d", sol.d[vi][gi]}});
    }
    const NodeCosts& c = sol.nodal[vi];
    nodes.push_back({{"node", v},
                     {"stage", instance.tree.node(v).stage},
                     {"probability", sol.node_prob[vi]},
                     {"generators", std::move(gens)},
                     {"cost", {{"startup", c.startup},
                               {"shutdown", c.shutdown},
                               {"energy", c.energy},
                               {"commitment", c.commitment},
                               {"up_reg", c.up_reg},
                               {"down_reg", c.down_reg},
                               {"total", c.total()}}}});
  }
  j["nodes"] = std::move(nodes);
  return j;
}

inline UCSolution solution_from_json(const nlohmann::json& j, const UCInstance& instance) {
  UCSolution sol;
  sol.objective = j.at("objective").get<double>();
  sol.solve_mode = j.value("solve_mode", "");
  std::string status = j.value("status", "optimal");
  sol.status = status == "optimal" ? SolveStatus::Optimal
               : status == "infeasible" ? SolveStatus::Infeasible
               : status == "unbounded" ? SolveStatus::Unbounded
                                        : SolveStatus::LimitReached;
  if (j.contains("gap")) sol.gap = j["gap"].get<double>();
  const auto& nodes = j.at("nodes");
  const int V = static_cast<int>(nodes.size());
  const int G = instance.system.num_generators();
  auto sized = [&] { return std::vector<std::vector<double>>(static_cast<std::size_t>(V),
                                                             std::vector<double>(static_cast<std::size_t>(G), 0.0)); };
  sol.x = sized();
  sol.y = sized();
  sol.s_on = sized();
  sol.s_off = sized();
  sol.o = sized();
  sol.d = sized();
  sol.node_prob.assign(static_cast<std::size_t>(V), 0.0);
  sol.nodal.resize(static_cast<std::size_t>(V));
  for (const auto& nj : nodes) {
    int v = nj.at("node").get<int>();
    const std::size_t vi = static_cast<std::size_t>(v);
    sol.node_prob[vi] = nj.at("probability").get<double>();
    const auto& gens = nj.at("generators");
    for (int g = 0; g < G; ++g) {
      const auto& gj = gens.at(static_cast<std::size_t>(g));
      const std::size_t gi = static_cast<std::size_t>(g);
      sol.x[vi][gi] = gj.at("x").get<double>();
      sol.y[vi][gi] = gj.at("y").get<double>();
      sol.s_on[vi][gi] = gj.at("s_on").get<double>();
      sol.s_off[vi][gi] = gj.at("s_off").get<double>();
      sol.o[vi][gi] = gj.at("o").get<double>();
      sol.d[vi][gi] = gj.at("d").get<double>();
    }
    sol.nodal[vi] = nodal_cost(sol, instance.system, v);
  }
  return sol;
}

inline void save_solution(const UCSolution& sol, const UCInstance& instance,
                          const std::filesystem::path& path) {
  std::ofstream out(path);
  require(out.good(), "cannot open ", path.string(), " for writing");
  out << solution_to_json(sol, instance).dump(2) << "\n";
  require(out.good(), "failed writing ", path.string());
}

}  // namespace dmsuc
