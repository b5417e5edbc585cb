#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dmsuc/common.hpp"
#include "dmsuc/dmsuc_engine.hpp"
#include "dmsuc/tree_builder.hpp"

namespace dmsuc {

/// Run configuration shared by the CLI subcommands.  A JSON config file can
/// preload any field; command-line flags override it.
struct RunConfig {
  // paths
  std::string data_path, system_path, library_path, output_path;
  // tree parameters
  int period = 24;
  int horizon = 5;
  int bins = 3;
  long long iterations = 10000;
  std::uint64_t seed = 1;
  double step_a0 = 1.0;
  double step_n0 = 30.0;
  bool prune_zero_prob = false;
  // solver
  double mip_gap = 1e-6;
  long long node_limit = -1;
  long long time_limit_ms = -1;
  int binary_threshold = 200;
  // pricing
  std::string pricing_mode = "marginal";
  double shortage_price = 0.0;
  double surplus_penalty = 0.0;
  double surplus_factor = 0.1;
  // epochs and parallelism
  int epochs = 5;
  int jobs = 0;  // 0: hardware concurrency

  ValidationReport validate() const {
    ValidationReport report;
    if (horizon < 2) report.add("horizon", "horizon must be >= 2");
    if (bins < 1) report.add("bins", "bins must be >= 1");
    if (iterations < 1) report.add("iterations", "iterations must be >= 1");
    if (period < 1) report.add("period", "period must be >= 1");
    if (epochs < 1) report.add("epochs", "epochs must be >= 1");
    if (pricing_mode != "marginal" && pricing_mode != "fixed")
      report.add("pricing", "pricing mode must be 'marginal' or 'fixed'");
    return report;
  }

  LibraryBuildConfig library_build_config() const {
    LibraryBuildConfig config;
    config.params.period = period;
    config.params.horizon = horizon;
    config.params.bins = bins;
    config.params.iterations = iterations;
    config.params.seed = seed;
    config.params.step = {step_a0, step_n0};
    config.prune_zero_prob = prune_zero_prob;
    for (int k = 0; k < epochs; ++k) config.epochs.push_back(k);
    config.jobs = effective_jobs();
    return config;
  }

  UcSolveOptions solve_options() const {
    UcSolveOptions options;
    options.milp.mip_gap = mip_gap;
    options.milp.node_limit = node_limit;
    options.milp.time_limit_ms = time_limit_ms;
    options.binary_threshold = binary_threshold;
    return options;
  }

  ReservePricing reserve_pricing() const {
    ReservePricing pricing;
    pricing.mode = pricing_mode == "fixed" ? ReservePricing::Mode::Fixed
                                           : ReservePricing::Mode::MarginalUnit;
    pricing.shortage_price = shortage_price;
    pricing.surplus_penalty = surplus_penalty;
    pricing.surplus_factor = surplus_factor;
    return pricing;
  }

  int effective_jobs() const {
    if (jobs > 0) return jobs;
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
  }
};

inline void apply_config_json(RunConfig& config, const nlohmann::json& j) {
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("data", config.data_path);
  get("system", config.system_path);
  get("library", config.library_path);
  get("output", config.output_path);
  get("period", config.period);
  get("horizon", config.horizon);
  get("bins", config.bins);
  get("iterations", config.iterations);
  get("seed", config.seed);
  get("step_a0", config.step_a0);
  get("step_n0", config.step_n0);
  get("prune_zero_prob", config.prune_zero_prob);
  get("mip_gap", config.mip_gap);
  get("node_limit", config.node_limit);
  get("time_limit_ms", config.time_limit_ms);
  get("binary_threshold", config.binary_threshold);
  get("epochs", config.epochs);
  get("jobs", config.jobs);
  if (j.contains("pricing")) {
    const auto& p = j.at("pricing");
    if (p.contains("mode")) config.pricing_mode = p.at("mode").get<std::string>();
    if (p.contains("shortage_price")) config.shortage_price = p.at("shortage_price").get<double>();
    if (p.contains("surplus_penalty")) config.surplus_penalty = p.at("surplus_penalty").get<double>();
    if (p.contains("surplus_factor")) config.surplus_factor = p.at("surplus_factor").get<double>();
  }
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open config file ", path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    fail("malformed config file ", path.string(), ": ", e.what());
  }
  RunConfig config;
  apply_config_json(config, j);
  return config;
}

/// Pricing file: {"mode": "marginal"|"fixed", "shortage_price": ...,
/// "surplus_penalty": ..., "surplus_factor": ...}.
inline ReservePricing load_pricing(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open pricing file ", path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    fail("malformed pricing file ", path.string(), ": ", e.what());
  }
  ReservePricing pricing;
  std::string mode = j.value("mode", "marginal");
  require(mode == "marginal" || mode == "fixed", "pricing mode must be 'marginal' or 'fixed'");
  pricing.mode = mode == "fixed" ? ReservePricing::Mode::Fixed : ReservePricing::Mode::MarginalUnit;
  pricing.shortage_price = j.value("shortage_price", 0.0);
  pricing.surplus_penalty = j.value("surplus_penalty", 0.0);
  pricing.surplus_factor = j.value("surplus_factor", 0.1);
  return pricing;
}

// --- commitment state files -----------------------------------------------------

inline nlohmann::json commit_state_to_json(const CommitState& state) {
  nlohmann::json per_gen = nlohmann::json::array();
  for (const auto& g : state.per_gen)
    per_gen.push_back({{"on", g.on}, {"res_up", g.res_up}, {"res_down", g.res_down}});
  return {{"per_gen", std::move(per_gen)}};
}

inline CommitState commit_state_from_json(const nlohmann::json& j) {
  CommitState state;
  for (const auto& gj : j.at("per_gen"))
    state.per_gen.push_back(
        {gj.value("on", 0), gj.value("res_up", 0), gj.value("res_down", 0)});
  return state;
}

inline CommitState load_commit_state(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open state file ", path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    fail("malformed state file ", path.string(), ": ", e.what());
  }
  return commit_state_from_json(j);
}

inline void save_commit_state(const CommitState& state, const std::filesystem::path& path) {
  std::ofstream out(path);
  require(out.good(), "cannot open ", path.string(), " for writing");
  out << commit_state_to_json(state).dump(2) << "\n";
}

}  // namespace dmsuc
