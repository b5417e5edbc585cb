#pragma once

// Rolling-horizon controller.  Per decision epoch it picks the library tree
// matching the observed present, solves the nodal MILP with the carried
// commitment state, watches the realized load, identifies the closest
// scheduled scenario, and hands that leaf's (y, o, d) state plus its
// dispatch to the next epoch.  Ex-post and reserve costs are accounted
// against the realized path.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "dmsuc/tree_builder.hpp"
#include "dmsuc/uc_model.hpp"

namespace dmsuc {

/// Pricing of schedule-vs-realization deviations.  In `MarginalUnit` mode
/// the shortage price per stage is the c1 of the most expensive committed
/// unit at that stage's realized node and the surplus penalty is
/// surplus_factor times that; `Fixed` uses the explicit prices.
struct ReservePricing {
  enum class Mode { MarginalUnit, Fixed };
  Mode mode = Mode::MarginalUnit;
  double shortage_price = 0.0;   // $/MWh, Fixed mode
  double surplus_penalty = 0.0;  // $/MWh, Fixed mode
  double surplus_factor = 0.1;   // MarginalUnit mode
};

struct ReserveCostReport {
  std::vector<double> deviation_mw;      // per stage: realized - scheduled at rho+
  std::vector<double> shortage_price;    // per stage
  std::vector<double> surplus_penalty;   // per stage
  double total = 0.0;                    // $
};

struct EpochRecord {
  int epoch = 0;
  int bin = -1;                    // library bin picked by the here-and-now update
  ScenarioTree tree;               // augmented tree the epoch was solved on
  UCSolution solution;
  std::vector<double> realized;    // length-T MW
  NodeId v_star = -1;              // leaf of the closest scheduled scenario
  CommitState transferred_state;
  std::vector<double> transferred_dispatch;
  double objective = 0.0;          // expected cost of the epoch MILP
  double ex_post_cost = 0.0;       // unweighted cost along rho+
  double ex_post_cost_weighted = 0.0;  // probability-weighted variant
  ReserveCostReport reserve;
  std::vector<char> envelope_violation;  // per stage: realized left the tree's value range
  std::vector<std::string> warnings;
};

struct SimulationSummary {
  std::vector<int> epochs;
  std::vector<double> objective, ex_post, reserve;
  double avg_objective = 0.0, avg_ex_post = 0.0, avg_reserve = 0.0;
};

struct SimulationResult {
  std::vector<EpochRecord> records;
  SimulationSummary summary;
  bool completed = false;
  std::string error;
};

struct EngineOptions {
  UcSolveOptions solver;
  ReservePricing pricing;
  /// Carry the realized leaf's dispatch into the next epoch's root ramp.
  bool bridge_dispatch = true;
};

/// Here-and-now update plus MILP solve for one epoch.
inline std::pair<ScenarioTree, UCSolution> run_epoch(const TreeLibrary& library, int epoch,
                                                     double present, const CommitState& carried,
                                                     const PowerSystem& system,
                                                     const UcSolveOptions& solver_options = {},
                                                     const std::vector<double>& carried_dispatch = {},
                                                     int* bin_out = nullptr) {
  auto [tree, bin] = select_and_augment(library, epoch, present);
  if (bin_out) *bin_out = bin;
  UCInstance instance{system, tree, carried, carried_dispatch};
  try {
    UCSolution solution = solve_uc(instance, solver_options);
    return {std::move(tree), std::move(solution)};
  } catch (const Error& e) {
    fail("epoch ", epoch, ": ", e.what());
  }
}

/// Closest-scenario identification and commitment state extraction (Eq.-21
/// style transfer): the realized path's leaf state is what the next epoch is
/// initialized with.
inline std::pair<NodeId, CommitState> observe_and_transfer(const ScenarioTree& tree,
                                                           const UCSolution& solution,
                                                           const PowerSystem& system,
                                                           std::span<const double> realized,
                                                           std::vector<std::string>* warnings = nullptr) {
  auto [leaf, dist] = tree.closest_path(realized);
  (void)dist;
  CommitState state = commit_state_at(solution, system, leaf, warnings);
  return {leaf, state};
}

/// Unweighted nodal cost summed along the closest-to-realization path.
inline double ex_post_cost(const ScenarioTree& tree, const UCSolution& solution,
                           std::span<const double> realized) {
  auto [leaf, dist] = tree.closest_path(realized);
  (void)dist;
  double total = 0.0;
  auto path = tree.path_to(leaf);
  for (NodeId v : path.node_ids) total += solution.nodal[static_cast<std::size_t>(v)].total();
  return total;
}

/// Probability-weighted variant of the ex-post cost along the same path.
inline double ex_post_cost_weighted(const ScenarioTree& tree, const UCSolution& solution,
                                    std::span<const double> realized) {
  auto [leaf, dist] = tree.closest_path(realized);
  (void)dist;
  double total = 0.0;
  auto path = tree.path_to(leaf);
  for (NodeId v : path.node_ids)
    total += solution.node_prob[static_cast<std::size_t>(v)] *
             solution.nodal[static_cast<std::size_t>(v)].total();
  return total;
}

/// Stage-wise deviation between realized load and the scheduled production
/// along the closest path, priced as reserve deployment.
inline ReserveCostReport reserve_cost(const ScenarioTree& tree, const UCSolution& solution,
                                      const PowerSystem& system, std::span<const double> realized,
                                      const ReservePricing& pricing) {
  ReserveCostReport report;
  auto [leaf, dist] = tree.closest_path(realized);
  (void)dist;
  auto path = tree.path_to(leaf);
  double max_c1_all = 0.0;
  for (const auto& g : system.generators) max_c1_all = std::max(max_c1_all, g.c1);
  for (std::size_t t = 0; t < path.node_ids.size(); ++t) {
    NodeId v = path.node_ids[t];
    const std::size_t vi = static_cast<std::size_t>(v);
    double scheduled = 0.0;
    double marginal_c1 = 0.0;
    for (int g = 0; g < solution.num_gens(); ++g) {
      scheduled += solution.x[vi][static_cast<std::size_t>(g)];
      if (solution.y[vi][static_cast<std::size_t>(g)] > 0.5)
        marginal_c1 = std::max(marginal_c1, system.generators[static_cast<std::size_t>(g)].c1);
    }
    double shortage, surplus;
    if (pricing.mode == ReservePricing::Mode::Fixed) {
      shortage = pricing.shortage_price;
      surplus = pricing.surplus_penalty;
    } else {
      // cost of the marginal committed unit; fall back to the system-wide
      // most expensive unit when nothing is committed
      shortage = marginal_c1 > 0.0 ? marginal_c1 : max_c1_all;
      surplus = pricing.surplus_factor * shortage;
    }
    double deviation = realized[t] - scheduled;
    report.deviation_mw.push_back(deviation);
    report.shortage_price.push_back(shortage);
    report.surplus_penalty.push_back(surplus);
    report.total += shortage * std::max(deviation, 0.0) + surplus * std::max(-deviation, 0.0);
  }
  return report;
}

/// Per-stage flags marking stages where the realized load left the range of
/// the tree's stage values.
inline std::vector<char> envelope_violations(const ScenarioTree& tree,
                                             std::span<const double> realized, double tol = 1e-9) {
  std::vector<char> flags(static_cast<std::size_t>(tree.depth()), 0);
  for (int t = 0; t < tree.depth(); ++t) {
    double lo = kInfinity, hi = -kInfinity;
    for (NodeId v : tree.stage_nodes(t)) {
      lo = std::min(lo, tree.node(v).value);
      hi = std::max(hi, tree.node(v).value);
    }
    if (realized[static_cast<std::size_t>(t)] < lo - tol ||
        realized[static_cast<std::size_t>(t)] > hi + tol)
      flags[static_cast<std::size_t>(t)] = 1;
  }
  return flags;
}

/// Chains run_epoch -> observe_and_transfer over consecutive epochs.  The
/// present of epoch k is realized_series[k*T]; a failed epoch aborts the run
/// with the partial records preserved.
inline SimulationResult simulate(const TreeLibrary& library, const PowerSystem& system,
                                 std::span<const double> realized_series, int num_epochs,
                                 const EngineOptions& options = {}) {
  const int T = library.params().horizon;
  SimulationResult result;
  if (static_cast<int>(realized_series.size()) < num_epochs * T) {
    result.error = "realized series has " + std::to_string(realized_series.size()) +
                   " stages, need " + std::to_string(num_epochs * T);
    return result;
  }

  CommitState carried = CommitState::cold(system.num_generators());
  std::vector<double> carried_dispatch;
  for (int epoch = 0; epoch < num_epochs; ++epoch) {
    std::span<const double> realized =
        realized_series.subspan(static_cast<std::size_t>(epoch) * static_cast<std::size_t>(T),
                                static_cast<std::size_t>(T));
    EpochRecord record;
    record.epoch = epoch;
    record.realized.assign(realized.begin(), realized.end());
    try {
      auto [tree, solution] =
          run_epoch(library, epoch, realized[0], carried, system, options.solver,
                    carried_dispatch, &record.bin);
      record.tree = std::move(tree);
      record.solution = std::move(solution);
    } catch (const Error& e) {
      result.error = e.what();
      result.records.push_back(std::move(record));
      return result;
    }

    auto [v_star, state] = observe_and_transfer(record.tree, record.solution, system, realized,
                                                &record.warnings);
    record.v_star = v_star;
    record.transferred_state = state;
    record.objective = record.solution.objective;
    record.ex_post_cost = ex_post_cost(record.tree, record.solution, realized);
    record.ex_post_cost_weighted = ex_post_cost_weighted(record.tree, record.solution, realized);
    record.reserve = reserve_cost(record.tree, record.solution, system, realized, options.pricing);
    record.envelope_violation = envelope_violations(record.tree, realized);
    record.transferred_dispatch.assign(static_cast<std::size_t>(system.num_generators()), 0.0);
    for (int g = 0; g < system.num_generators(); ++g)
      record.transferred_dispatch[static_cast<std::size_t>(g)] =
          record.solution.x[static_cast<std::size_t>(v_star)][static_cast<std::size_t>(g)];

    carried = record.transferred_state;
    carried_dispatch = options.bridge_dispatch ? record.transferred_dispatch
                                               : std::vector<double>();
    result.records.push_back(std::move(record));
  }

  auto& summary = result.summary;
  for (const auto& record : result.records) {
    summary.epochs.push_back(record.epoch);
    summary.objective.push_back(record.objective);
    summary.ex_post.push_back(record.ex_post_cost);
    summary.reserve.push_back(record.reserve.total);
    summary.avg_objective += record.objective;
    summary.avg_ex_post += record.ex_post_cost;
    summary.avg_reserve += record.reserve.total;
  }
  if (!result.records.empty()) {
    double n = static_cast<double>(result.records.size());
    summary.avg_objective /= n;
    summary.avg_ex_post /= n;
    summary.avg_reserve /= n;
  }
  result.completed = true;
  return result;
}

// --- batch running -----------------------------------------------------------------

struct ChainSpec {
  int id = 0;
  const TreeLibrary* library = nullptr;
  const PowerSystem* system = nullptr;
  std::vector<double> realized_series;
  int num_epochs = 0;
  EngineOptions options;
};

/// Runs independent chains, optionally in parallel; results come back sorted
/// by instance id regardless of scheduling.
inline std::vector<std::pair<int, SimulationResult>> run_batch(const std::vector<ChainSpec>& chains,
                                                               int jobs = 1) {
  std::vector<std::pair<int, SimulationResult>> results(chains.size());
  parallel_for(chains.size(), jobs, [&](std::size_t i) {
    const ChainSpec& spec = chains[i];
    require(spec.library && spec.system, "run_batch: chain ", spec.id, " missing library or system");
    results[i] = {spec.id,
                  simulate(*spec.library, *spec.system, spec.realized_series, spec.num_epochs,
                           spec.options)};
  });
  std::sort(results.begin(), results.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return results;
}

// --- report files ------------------------------------------------------------------

namespace detail {

inline std::string csv_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace detail

/// summary.csv: one row per epoch.
inline void write_summary_csv(const SimulationResult& result, const std::filesystem::path& path) {
  std::ofstream out(path);
  require(out.good(), "cannot open ", path.string(), " for writing");
  out << "epoch,objective,c_e,reserve_cost,envelope_violations,bin,v_star,c_e_weighted,solve_mode\n";
  for (const auto& r : result.records) {
    int env = 0;
    for (char f : r.envelope_violation) env += f != 0;
    out << r.epoch << "," << detail::csv_number(r.objective) << ","
        << detail::csv_number(r.ex_post_cost) << "," << detail::csv_number(r.reserve.total) << ","
        << env << "," << r.bin << "," << r.v_star << ","
        << detail::csv_number(r.ex_post_cost_weighted) << "," << r.solution.solve_mode << "\n";
  }
  require(out.good(), "failed writing ", path.string());
}

/// scenarios.csv: long-format rows for plotting scheduled scenarios against
/// the realized trajectory.
inline void write_scenarios_csv(const SimulationResult& result, const std::filesystem::path& path) {
  std::ofstream out(path);
  require(out.good(), "cannot open ", path.string(), " for writing");
  out << "epoch,kind,leaf,stage,load_mw,probability\n";
  for (const auto& r : result.records) {
    if (r.tree.size() == 0) continue;
    for (NodeId leaf : r.tree.leaves()) {
      auto p = r.tree.path_to(leaf);
      for (int t = 0; t < p.length(); ++t)
        out << r.epoch << ",scenario," << leaf << "," << t << ","
            << detail::csv_number(p.values[static_cast<std::size_t>(t)]) << ","
            << detail::csv_number(p.probability) << "\n";
    }
    for (std::size_t t = 0; t < r.realized.size(); ++t)
      out << r.epoch << ",realized,-1," << t << "," << detail::csv_number(r.realized[t]) << ",1\n";
  }
  require(out.good(), "failed writing ", path.string());
}

}  // namespace dmsuc
