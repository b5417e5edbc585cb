#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "dmsuc/common.hpp"
#include "dmsuc/linear_algebra.hpp"

namespace dmsuc {

using BusId = int;

struct Generator {
  std::string id;
  BusId bus = 0;
  double p_min = 0.0, p_max = 0.0;        // MW
  double ramp_down = 0.0, ramp_up = 0.0;  // MW per stage
  double c1 = 0.0;                        // $/MWh
  double c0 = 0.0;                        // $/h while committed
  double startup_cost = 0.0, shutdown_cost = 0.0;  // $
  int min_up = 1, min_down = 1;           // stages

  bool has_state_constraints() const { return min_up > 1 || min_down > 1; }
};

struct Bus {
  BusId id = 0;
  double load_share = 0.0;  // fraction of the system load served here
};

struct TransmissionLine {
  BusId from = 0, to = 0;
  double reactance = 0.0;  // p.u., used when the PTDF is computed
  double limit = 0.0;      // MW, symmetric
};

/// Grid model: buses, lines, line-flow sensitivities, and the fixed mapping
/// from system load to per-bus loads.
struct Network {
  std::vector<Bus> buses;
  std::vector<TransmissionLine> lines;
  /// ptdf[l][b]: MW flow on line l per MW injected at bus b (withdrawn at the
  /// slack bus).
  std::vector<std::vector<double>> ptdf;
  BusId slack_bus = 0;

  int bus_index(BusId id) const {
    for (std::size_t i = 0; i < buses.size(); ++i)
      if (buses[i].id == id) return static_cast<int>(i);
    fail("network: unknown bus id ", id);
  }
};

struct PowerSystem {
  std::string name;
  Network network;
  std::vector<Generator> generators;

  int num_buses() const { return static_cast<int>(network.buses.size()); }
  int num_lines() const { return static_cast<int>(network.lines.size()); }
  int num_generators() const { return static_cast<int>(generators.size()); }

  double total_capacity() const {
    double sum = 0.0;
    for (const auto& g : generators) sum += g.p_max;
    return sum;
  }

  ValidationReport validate() const {
    ValidationReport report;
    double share = 0.0;
    std::map<BusId, int> seen;
    for (const auto& b : network.buses) {
      if (seen.count(b.id)) report.add("bus_dup", "duplicate bus id " + std::to_string(b.id));
      seen[b.id] = 1;
      if (b.load_share < 0)
        report.add("load_share_sign", "bus " + std::to_string(b.id) + " has negative load share");
      share += b.load_share;
    }
    if (std::fabs(share - 1.0) > 1e-9)
      report.add("load_share_sum", "bus load shares sum to " + std::to_string(share) +
                                       ", expected 1");
    for (const auto& l : network.lines) {
      if (!seen.count(l.from) || !seen.count(l.to))
        report.add("line_bus", "line " + std::to_string(l.from) + "-" + std::to_string(l.to) +
                                   " references an unknown bus");
      if (l.limit <= 0)
        report.add("line_limit", "line " + std::to_string(l.from) + "-" + std::to_string(l.to) +
                                     " needs a positive limit");
    }
    if (!network.ptdf.empty()) {
      if (network.ptdf.size() != network.lines.size())
        report.add("ptdf_rows", "PTDF must have one row per line");
      for (const auto& row : network.ptdf)
        if (row.size() != network.buses.size()) {
          report.add("ptdf_cols", "PTDF rows must have one entry per bus");
          break;
        }
    }
    std::map<std::string, int> gen_seen;
    for (const auto& g : generators) {
      if (gen_seen.count(g.id)) report.add("gen_dup", "duplicate generator id " + g.id);
      gen_seen[g.id] = 1;
      if (!seen.count(g.bus))
        report.add("gen_bus", "generator " + g.id + " sits on unknown bus " + std::to_string(g.bus));
      if (g.p_min < 0 || g.p_max < g.p_min)
        report.add("gen_limits", "generator " + g.id + " needs 0 <= p_min <= p_max");
      if (g.ramp_up < 0 || g.ramp_down < 0)
        report.add("gen_ramps", "generator " + g.id + " needs non-negative ramps");
      if (g.min_up < 1 || g.min_down < 1)
        report.add("gen_min_times", "generator " + g.id + " needs min_up, min_down >= 1");
      if (g.c1 < 0 || g.c0 < 0 || g.startup_cost < 0 || g.shutdown_cost < 0)
        report.add("gen_costs", "generator " + g.id + " has a negative cost");
    }
    return report;
  }
};

/// DC power transfer distribution factors from line reactances.  Injections
/// are balanced at the slack bus; an unconnected network raises.
inline std::vector<std::vector<double>> compute_ptdf(const Network& network, BusId slack_bus) {
  const int n = static_cast<int>(network.buses.size());
  const int slack = network.bus_index(slack_bus);
  require(n >= 1, "ptdf: no buses");
  for (const auto& l : network.lines)
    require(l.reactance > 0, "ptdf: line ", l.from, "-", l.to,
            " needs a positive reactance to compute the PTDF");

  // Reduced susceptance matrix (slack row/column removed).
  auto reduced = [&](int bus) { return bus < slack ? bus : bus - 1; };
  const int nr = n - 1;
  std::vector<double> b(static_cast<std::size_t>(nr) * static_cast<std::size_t>(nr), 0.0);
  for (const auto& l : network.lines) {
    int i = network.bus_index(l.from);
    int j = network.bus_index(l.to);
    double y = 1.0 / l.reactance;
    if (i != slack) b[static_cast<std::size_t>(reduced(i)) * nr + reduced(i)] += y;
    if (j != slack) b[static_cast<std::size_t>(reduced(j)) * nr + reduced(j)] += y;
    if (i != slack && j != slack) {
      b[static_cast<std::size_t>(reduced(i)) * nr + reduced(j)] -= y;
      b[static_cast<std::size_t>(reduced(j)) * nr + reduced(i)] -= y;
    }
  }
  DenseLU lu;
  if (nr > 0)
    require(lu.factor(std::move(b), nr), "ptdf: susceptance matrix is singular; "
            "is the network connected?");

  // theta column per bus: angles for a unit injection at that bus.
  std::vector<std::vector<double>> theta(static_cast<std::size_t>(n),
                                         std::vector<double>(static_cast<std::size_t>(n), 0.0));
  for (int bus = 0; bus < n; ++bus) {
    if (bus == slack || nr == 0) continue;  // slack injection: all angles zero
    std::vector<double> rhs(static_cast<std::size_t>(nr), 0.0);
    rhs[static_cast<std::size_t>(reduced(bus))] = 1.0;
    lu.solve(rhs.data());
    for (int k = 0; k < n; ++k)
      if (k != slack) theta[static_cast<std::size_t>(bus)][static_cast<std::size_t>(k)] =
          rhs[static_cast<std::size_t>(reduced(k))];
  }

  std::vector<std::vector<double>> ptdf(network.lines.size(),
                                        std::vector<double>(static_cast<std::size_t>(n), 0.0));
  for (std::size_t l = 0; l < network.lines.size(); ++l) {
    int i = network.bus_index(network.lines[l].from);
    int j = network.bus_index(network.lines[l].to);
    double y = 1.0 / network.lines[l].reactance;
    for (int bus = 0; bus < n; ++bus)
      ptdf[l][static_cast<std::size_t>(bus)] =
          y * (theta[static_cast<std::size_t>(bus)][static_cast<std::size_t>(i)] -
               theta[static_cast<std::size_t>(bus)][static_cast<std::size_t>(j)]);
  }
  return ptdf;
}

// --- serialization -----------------------------------------------------------

inline nlohmann::json system_to_json(const PowerSystem& system) {
  nlohmann::json j;
  j["name"] = system.name;
  j["slack_bus"] = system.network.slack_bus;
  nlohmann::json buses = nlohmann::json::array();
  for (const auto& b : system.network.buses)
    buses.push_back({{"id", b.id}, {"load_share", b.load_share}});
  j["buses"] = std::move(buses);
  nlohmann::json lines = nlohmann::json::array();
  for (const auto& l : system.network.lines)
    lines.push_back({{"from", l.from}, {"to", l.to}, {"reactance", l.reactance}, {"limit", l.limit}});
  j["lines"] = std::move(lines);
  nlohmann::json gens = nlohmann::json::array();
  for (const auto& g : system.generators)
    gens.push_back({{"id", g.id},
                    {"bus", g.bus},
                    {"p_min", g.p_min},
                    {"p_max", g.p_max},
                    {"ramp_down", g.ramp_down},
                    {"ramp_up", g.ramp_up},
                    {"c1", g.c1},
                    {"c0", g.c0},
                    {"startup_cost", g.startup_cost},
                    {"shutdown_cost", g.shutdown_cost},
                    {"min_up", g.min_up},
                    {"min_down", g.min_down}});
  j["generators"] = std::move(gens);
  if (!system.network.ptdf.empty()) j["ptdf"] = system.network.ptdf;
  return j;
}

/// Loads and validates a system file; computes the PTDF from reactances when
/// the file does not carry one.
inline PowerSystem load_system(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open system file ", path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    fail("malformed system file ", path.string(), ": ", e.what());
  }

  PowerSystem system;
  try {
    system.name = j.value("name", "");
    for (const auto& bj : j.at("buses"))
      system.network.buses.push_back({bj.at("id").get<int>(), bj.value("load_share", 0.0)});
    for (const auto& lj : j.at("lines"))
      system.network.lines.push_back({lj.at("from").get<int>(), lj.at("to").get<int>(),
                                      lj.value("reactance", 0.0), lj.at("limit").get<double>()});
    for (const auto& gj : j.at("generators")) {
      Generator g;
      g.id = gj.at("id").get<std::string>();
      g.bus = gj.at("bus").get<int>();
      g.p_min = gj.at("p_min").get<double>();
      g.p_max = gj.at("p_max").get<double>();
      g.ramp_down = gj.at("ramp_down").get<double>();
      g.ramp_up = gj.at("ramp_up").get<double>();
      g.c1 = gj.at("c1").get<double>();
      g.c0 = gj.value("c0", 0.0);
      g.startup_cost = gj.value("startup_cost", 0.0);
      g.shutdown_cost = gj.value("shutdown_cost", 0.0);
      g.min_up = gj.value("min_up", 1);
      g.min_down = gj.value("min_down", 1);
      system.generators.push_back(std::move(g));
    }
    system.network.slack_bus =
        j.value("slack_bus", system.network.buses.empty() ? 0 : system.network.buses.front().id);
    if (j.contains("ptdf") && !j["ptdf"].is_null())
      system.network.ptdf = j["ptdf"].get<std::vector<std::vector<double>>>();
  } catch (const nlohmann::json::exception& e) {
    fail("system file ", path.string(), ": schema violation: ", e.what());
  }

  auto report = system.validate();
  require(report.ok(), "system file ", path.string(), " failed validation:\n", report.to_string());
  if (system.network.ptdf.empty() && !system.network.lines.empty())
    system.network.ptdf = compute_ptdf(system.network, system.network.slack_bus);
  return system;
}

inline void save_system(const PowerSystem& system, const std::filesystem::path& path) {
  std::ofstream out(path);
  require(out.good(), "cannot open ", path.string(), " for writing");
  out << system_to_json(system).dump(2) << "\n";
  require(out.good(), "failed writing ", path.string());
}

}  // namespace dmsuc
