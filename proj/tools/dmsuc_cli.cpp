// Command-line front end: library construction, wait-and-see updates,
// single-instance solves, rolling-horizon simulation, MPS export, and
// artifact validation.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dmsuc/config.hpp"
#include "dmsuc/dmsuc_engine.hpp"
#include "dmsuc/mps.hpp"
#include "dmsuc/timeseries.hpp"

namespace fs = std::filesystem;
using namespace dmsuc;

namespace {

std::vector<double> parse_value_list(const std::string& text) {
  std::vector<double> values;
  std::string token;
  std::istringstream in(text);
  while (std::getline(in, token, ',')) {
    try {
      values.push_back(std::stod(token));
    } catch (const std::exception&) {
      fail("cannot parse '", token, "' as a number in value list");
    }
  }
  require(!values.empty(), "empty value list");
  return values;
}

std::vector<double> series_values(const TimeSeries& series, const std::string& context) {
  if (series.has_gaps()) {
    std::string gaps;
    for (std::size_t i = 0; i < series.gap_timestamps.size() && i < 5; ++i)
      gaps += (i ? ", " : "") + format_iso8601(series.gap_timestamps[i]);
    fail(context, ": series has ", series.gap_timestamps.size(),
         " gap(s) and cannot be used (first: ", gaps, ")");
  }
  return series.values;
}

int cmd_build_library(const RunConfig& config) {
  auto report = config.validate();
  require(report.ok(), "invalid configuration:\n", report.to_string());
  require(!config.data_path.empty(), "build-library needs --data");
  require(!config.output_path.empty(), "build-library needs --out");

  TimeSeries series = load_timeseries(config.data_path);
  std::vector<double> values = series_values(series, "build-library");
  TreeLibrary library = build_library(values, config.library_build_config());
  auto lib_report = library.validate();
  require(lib_report.ok(), "built library failed validation:\n", lib_report.to_string());
  fs::create_directories(config.output_path);
  save_library(library, config.output_path);
  std::cout << "library: " << library.entries().size() << " trees (" << config.epochs
            << " epochs x " << config.bins << " bins, T=" << config.horizon << ") -> "
            << config.output_path << "\n";
  return 0;
}

int cmd_update_library(const RunConfig& config, int epoch, int bin, const std::string& values_text,
                       long long n_step) {
  require(!config.library_path.empty(), "update-library needs --library");
  require(!config.output_path.empty(), "update-library needs --out");
  TreeLibrary library = load_library(config.library_path);
  std::vector<double> realized = parse_value_list(values_text);
  const LibraryEntry& entry = library.entry(epoch, bin);
  long long step_index = n_step > 0 ? n_step : entry.n_total + 1;
  StepSchedule schedule{config.step_a0, config.step_n0};
  TreeLibrary updated = wait_and_see_update(library, epoch, bin, realized, schedule, step_index);
  fs::create_directories(config.output_path);
  save_library(updated, config.output_path);
  std::cout << "updated entry (" << epoch << "," << bin << ") with step index " << step_index
            << " -> " << config.output_path << "\n";
  return 0;
}

UCInstance load_instance(const RunConfig& config, const std::string& tree_path,
                         const std::string& init_path, const std::string& init_dispatch) {
  require(!config.system_path.empty(), "need --system");
  UCInstance instance;
  instance.system = load_system(config.system_path);
  auto [tree, meta] = load_tree(tree_path);
  (void)meta;
  instance.tree = std::move(tree);
  instance.init = init_path.empty() ? CommitState::cold(instance.system.num_generators())
                                    : load_commit_state(init_path);
  if (!init_dispatch.empty()) instance.init_dispatch = parse_value_list(init_dispatch);
  auto report = instance.validate();
  require(report.ok(), "instance failed validation:\n", report.to_string());
  return instance;
}

int cmd_solve(const RunConfig& config, const std::string& tree_path, const std::string& init_path,
              const std::string& init_dispatch, const std::string& export_path) {
  UCInstance instance = load_instance(config, tree_path, init_path, init_dispatch);
  if (!export_path.empty()) {
    UcMilp milp = build_milp(instance);
    write_mps(milp.lp, export_path);
    std::cout << "MPS written to " << export_path << " (" << milp.lp.num_rows() << " rows, "
              << milp.lp.num_cols() << " cols, " << milp.lp.num_integers() << " binaries)\n";
  }
  UCSolution solution = solve_uc(instance, config.solve_options());
  if (solution.solve_mode == "heuristic")
    std::cerr << "note: instance above the internal-solver threshold ("
              << config.binary_threshold
              << " binaries); returned the priority-heuristic schedule. Use export-mps and an "
                 "external solver for a proven optimum.\n";
  if (!config.output_path.empty()) {
    save_solution(solution, instance, config.output_path);
    std::cout << "solution -> " << config.output_path << "\n";
  }
  std::printf("status=%s mode=%s objective=%.6f\n", to_string(solution.status),
              solution.solve_mode.c_str(), solution.objective);
  return 0;
}

int cmd_export_mps(const RunConfig& config, const std::string& tree_path,
                   const std::string& init_path, const std::string& init_dispatch) {
  require(!config.output_path.empty(), "export-mps needs --out");
  UCInstance instance = load_instance(config, tree_path, init_path, init_dispatch);
  UcMilp milp = build_milp(instance);
  write_mps(milp.lp, config.output_path);
  std::cout << "MPS written to " << config.output_path << " (" << milp.lp.num_rows() << " rows, "
            << milp.lp.num_cols() << " cols, " << milp.lp.num_integers() << " binaries)\n";
  return 0;
}

int cmd_simulate(const RunConfig& config, const std::string& realized_path,
                 const std::string& pricing_path) {
  require(!config.library_path.empty(), "simulate needs --library");
  require(!config.system_path.empty(), "simulate needs --system");
  require(!config.output_path.empty(), "simulate needs --out");

  TreeLibrary library = load_library(config.library_path);
  PowerSystem system = load_system(config.system_path);
  TimeSeries series = load_timeseries(realized_path);
  std::vector<double> realized = series_values(series, "simulate");
  const int T = library.params().horizon;
  require(static_cast<int>(realized.size()) >= config.epochs * T, "realized series has ",
          realized.size(), " stages, need ", config.epochs * T, " for ", config.epochs,
          " epochs of length ", T);

  EngineOptions options;
  options.solver = config.solve_options();
  options.pricing = pricing_path.empty() ? config.reserve_pricing() : load_pricing(pricing_path);

  SimulationResult result = simulate(library, system, realized, config.epochs, options);

  fs::create_directories(config.output_path);
  fs::path out_dir(config.output_path);
  write_summary_csv(result, out_dir / "summary.csv");
  write_scenarios_csv(result, out_dir / "scenarios.csv");
  for (const auto& record : result.records) {
    if (record.tree.size() == 0) continue;
    TreeMeta meta;
    meta.epoch = record.epoch;
    meta.bin = record.bin;
    save_tree(record.tree, out_dir / ("epoch_" + std::to_string(record.epoch) + "_tree.json"), meta);
    if (record.solution.num_nodes() == 0) continue;
    UCInstance shell{system, record.tree, CommitState::cold(system.num_generators()), {}};
    save_solution(record.solution, shell,
                  out_dir / ("epoch_" + std::to_string(record.epoch) + "_solution.json"));
    save_commit_state(record.transferred_state,
                      out_dir / ("epoch_" + std::to_string(record.epoch) + "_state.json"));
  }

  for (const auto& record : result.records)
    for (const auto& warning : record.warnings)
      std::cerr << "warning: epoch " << record.epoch << ": " << warning << "\n";
  if (!result.completed) {
    std::cerr << "simulation aborted: " << result.error << "\n";
    std::cerr << "partial outputs in " << config.output_path << "\n";
    return 1;
  }
  std::printf("%zu epochs simulated; avg objective %.6f, avg C_e %.6f, avg reserve %.6f -> %s\n",
              result.records.size(), result.summary.avg_objective, result.summary.avg_ex_post,
              result.summary.avg_reserve, config.output_path.c_str());
  return 0;
}

int cmd_validate(const std::string& tree_path, const std::string& system_path,
                 const std::string& library_path) {
  bool all_ok = true;
  if (!tree_path.empty()) {
    auto [tree, meta] = load_tree(tree_path);
    (void)meta;
    auto report = tree.validate();
    if (report.ok()) {
      std::cout << tree_path << ": valid tree (T=" << tree.depth() << ", " << tree.size()
                << " nodes)\n";
    } else {
      std::cout << tree_path << ": INVALID\n" << report.to_string();
      all_ok = false;
    }
  }
  if (!system_path.empty()) {
    PowerSystem system = load_system(system_path);  // throws with details if invalid
    std::cout << system_path << ": valid system (" << system.num_buses() << " buses, "
              << system.num_generators() << " generators, " << system.num_lines() << " lines)\n";
  }
  if (!library_path.empty()) {
    TreeLibrary library = load_library(library_path);
    auto report = library.validate();
    if (report.ok()) {
      std::cout << library_path << ": valid library (" << library.entries().size() << " trees)\n";
    } else {
      std::cout << library_path << ": INVALID\n" << report.to_string();
      all_ok = false;
    }
  }
  return all_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dynamic multistage stochastic unit commitment toolkit"};
  app.require_subcommand(1);

  // --config preloads defaults; explicit flags override it.
  RunConfig config;
  std::string config_path;
  for (int i = 1; i + 1 < argc; ++i)
    if (std::string(argv[i]) == "--config") config_path = argv[i + 1];
  if (!config_path.empty()) {
    try {
      config = load_config(config_path);
    } catch (const Error& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 1;
    }
  }
  app.add_option("--config", config_path, "JSON config file with defaults for all flags");

  auto add_solver_flags = [&](CLI::App* cmd) {
    cmd->add_option("--mip-gap", config.mip_gap, "relative MIP gap");
    cmd->add_option("--node-limit", config.node_limit, "branch-and-bound node limit (-1: off)");
    cmd->add_option("--time-limit", config.time_limit_ms, "solve time limit in ms (-1: off)");
    cmd->add_option("--threshold", config.binary_threshold,
                    "binary count above which the heuristic schedule is used");
  };

  // build-library
  auto* build = app.add_subcommand("build-library", "fit a scenario-tree library from load data");
  build->add_option("--data", config.data_path, "load CSV (timestamp,load_mw)")->required();
  build->add_option("--period", config.period, "cyclostationary period in samples");
  build->add_option("--horizon", config.horizon, "tree depth T");
  build->add_option("--bins", config.bins, "quantization bins per epoch");
  build->add_option("--iters", config.iterations, "stochastic-approximation iterations");
  build->add_option("--seed", config.seed, "master seed");
  build->add_option("--epochs", config.epochs, "number of epoch phases (0..K-1)");
  build->add_option("--step-a0", config.step_a0, "step schedule a0");
  build->add_option("--step-n0", config.step_n0, "step schedule n0");
  build->add_option("--jobs", config.jobs, "parallel fits (0: all cores)");
  build->add_flag("--prune-zero", config.prune_zero_prob, "drop never-visited subtrees");
  build->add_option("--out", config.output_path, "output library directory")->required();

  // update-library
  auto* update = app.add_subcommand("update-library", "wait-and-see update of one library entry");
  int up_epoch = 0, up_bin = 0;
  long long up_step = -1;
  std::string up_values;
  update->add_option("--library", config.library_path, "library directory")->required();
  update->add_option("--epoch", up_epoch, "epoch index")->required();
  update->add_option("--bin", up_bin, "bin index")->required();
  update->add_option("--values", up_values, "realized trajectory, comma-separated MW")->required();
  update->add_option("--n-step", up_step, "step index (default: entry n_total + 1)");
  update->add_option("--step-a0", config.step_a0, "step schedule a0");
  update->add_option("--step-n0", config.step_n0, "step schedule n0");
  update->add_option("--out", config.output_path, "output library directory")->required();

  // solve
  auto* solve = app.add_subcommand("solve", "build and solve one instance");
  std::string tree_path, init_path, init_dispatch, export_path;
  solve->add_option("--system", config.system_path, "system JSON file")->required();
  solve->add_option("--tree", tree_path, "scenario tree file")->required();
  solve->add_option("--init", init_path, "initial commitment state JSON");
  solve->add_option("--init-dispatch", init_dispatch, "carried dispatch, comma-separated MW");
  solve->add_option("--out", config.output_path, "solution output file");
  solve->add_option("--export-mps", export_path, "also export the model as MPS");
  add_solver_flags(solve);

  // simulate
  auto* simulate_cmd = app.add_subcommand("simulate", "rolling-horizon simulation");
  std::string realized_path, pricing_path;
  simulate_cmd->add_option("--library", config.library_path, "library directory")->required();
  simulate_cmd->add_option("--system", config.system_path, "system JSON file")->required();
  simulate_cmd->add_option("--realized", realized_path, "realized load CSV")->required();
  simulate_cmd->add_option("--epochs", config.epochs, "number of chained epochs");
  simulate_cmd->add_option("--pricing", pricing_path, "reserve pricing JSON file");
  simulate_cmd->add_option("--out", config.output_path, "output directory")->required();
  add_solver_flags(simulate_cmd);

  // export-mps
  auto* export_cmd = app.add_subcommand("export-mps", "write one instance as an MPS file");
  export_cmd->add_option("--system", config.system_path, "system JSON file")->required();
  export_cmd->add_option("--tree", tree_path, "scenario tree file")->required();
  export_cmd->add_option("--init", init_path, "initial commitment state JSON");
  export_cmd->add_option("--init-dispatch", init_dispatch, "carried dispatch, comma-separated MW");
  export_cmd->add_option("--out", config.output_path, "MPS output file")->required();

  // validate
  auto* validate_cmd = app.add_subcommand("validate", "validate trees, systems, or libraries");
  std::string v_tree, v_system, v_library;
  validate_cmd->add_option("--tree", v_tree, "scenario tree file");
  validate_cmd->add_option("--system", v_system, "system JSON file");
  validate_cmd->add_option("--library", v_library, "library directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (build->parsed()) return cmd_build_library(config);
    if (update->parsed()) return cmd_update_library(config, up_epoch, up_bin, up_values, up_step);
    if (solve->parsed()) return cmd_solve(config, tree_path, init_path, init_dispatch, export_path);
    if (simulate_cmd->parsed()) return cmd_simulate(config, realized_path, pricing_path);
    if (export_cmd->parsed()) return cmd_export_mps(config, tree_path, init_path, init_dispatch);
    if (validate_cmd->parsed()) {
      require(!v_tree.empty() || !v_system.empty() || !v_library.empty(),
              "validate needs at least one of --tree, --system, --library");
      return cmd_validate(v_tree, v_system, v_library);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
