#pragma once

// Random-but-always-committable UC instances for property tests: a big
// zero-minimum base unit guarantees feasibility, the other units carry
// random technical limits.  Loads stay above the worst-case sum of minimum
// generations so forced commitments never break the balance.

#include <random>
#include <vector>

#include "dmsuc/uc_model.hpp"
#include "support/generators.hpp"

namespace testsupport {

struct RandomUcConfig {
  int max_extra_units = 2;   // on top of the base unit
  int max_depth = 3;
  bool allow_binary_tree = true;
  bool random_init = false;
  bool force_infeasible = false;  // make one stage exceed total capacity
  int fixed_depth = 0;            // 0: random in [1, max_depth]
};

inline dmsuc::PowerSystem random_uc_system(std::mt19937_64& rng, int extra_units) {
  dmsuc::PowerSystem sys;
  sys.name = "random";
  sys.network.buses = {{1, 0.6}, {2, 0.4}};
  // bus 2 imports at most 0.4 * 350 = 140 MW, so any limit above that keeps
  // the random instances feasible while still shaping the dispatch
  sys.network.lines = {{1, 2, 0.1, 150.0 + 4850.0 * dmsuc::uniform_unit(rng)}};
  sys.network.slack_bus = 1;
  sys.network.ptdf = dmsuc::compute_ptdf(sys.network, 1);

  dmsuc::Generator base;
  base.id = "base";
  base.bus = 1;
  base.p_min = 0.0;
  base.p_max = 400.0;
  base.ramp_up = base.ramp_down = 400.0;
  base.c1 = 10.0 + 10.0 * dmsuc::uniform_unit(rng);
  base.c0 = 1.0 + 9.0 * dmsuc::uniform_unit(rng);
  base.startup_cost = 20.0 + 80.0 * dmsuc::uniform_unit(rng);
  base.shutdown_cost = 5.0 + 25.0 * dmsuc::uniform_unit(rng);
  base.min_up = 1 + static_cast<int>(dmsuc::uniform_below(rng, 3));
  base.min_down = 1 + static_cast<int>(dmsuc::uniform_below(rng, 3));
  sys.generators.push_back(base);

  for (int g = 0; g < extra_units; ++g) {
    dmsuc::Generator gen;
    gen.id = "unit" + std::to_string(g + 1);
    gen.bus = dmsuc::uniform_below(rng, 2) ? 1 : 2;
    gen.p_min = 5.0 + 20.0 * dmsuc::uniform_unit(rng);
    gen.p_max = gen.p_min + 20.0 + 100.0 * dmsuc::uniform_unit(rng);
    gen.ramp_up = std::max(gen.p_min, gen.p_max * (0.5 + 0.5 * dmsuc::uniform_unit(rng)));
    gen.ramp_down = std::max(gen.p_min, gen.p_max * (0.5 + 0.5 * dmsuc::uniform_unit(rng)));
    gen.c1 = 5.0 + 35.0 * dmsuc::uniform_unit(rng);
    gen.c0 = 10.0 * dmsuc::uniform_unit(rng);
    gen.startup_cost = 20.0 + 180.0 * dmsuc::uniform_unit(rng);
    gen.shutdown_cost = 30.0 * dmsuc::uniform_unit(rng);
    gen.min_up = 1 + static_cast<int>(dmsuc::uniform_below(rng, 3));
    gen.min_down = 1 + static_cast<int>(dmsuc::uniform_below(rng, 3));
    sys.generators.push_back(gen);
  }
  return sys;
}

inline dmsuc::ScenarioTree random_uc_tree(std::mt19937_64& rng, const RandomUcConfig& config,
                                          double load_cap) {
  int depth = config.fixed_depth > 0
                  ? config.fixed_depth
                  : 1 + static_cast<int>(dmsuc::uniform_below(rng, static_cast<std::uint64_t>(config.max_depth)));
  bool binary = config.allow_binary_tree && depth >= 2 && dmsuc::uniform_below(rng, 2) == 1;
  auto load = [&]() { return 80.0 + (load_cap - 80.0) * dmsuc::uniform_unit(rng); };

  std::vector<dmsuc::TreeNode> nodes;
  nodes.push_back({0, 0, -1, 1.0, load()});
  std::vector<int> frontier{0};
  for (int stage = 1; stage < depth; ++stage) {
    std::vector<int> next;
    for (int parent : frontier) {
      int branch = binary ? 2 : 1;
      double w0 = 0.2 + 0.6 * dmsuc::uniform_unit(rng);
      for (int c = 0; c < branch; ++c) {
        dmsuc::TreeNode node;
        node.id = static_cast<int>(nodes.size());
        node.stage = stage;
        node.parent = parent;
        node.edge_prob = branch == 1 ? 1.0 : (c == 0 ? w0 : 1.0 - w0);
        node.value = load();
        next.push_back(node.id);
        nodes.push_back(node);
      }
    }
    frontier = std::move(next);
  }
  return dmsuc::ScenarioTree(std::move(nodes));
}

inline dmsuc::UCInstance random_uc_instance(std::mt19937_64& rng, const RandomUcConfig& config) {
  int extra = static_cast<int>(dmsuc::uniform_below(rng, static_cast<std::uint64_t>(config.max_extra_units + 1)));
  dmsuc::UCInstance instance;
  instance.system = random_uc_system(rng, extra);
  // The base unit alone covers any load we generate once the forced minimums
  // (at most ~75 MW) are netted out.
  instance.tree = random_uc_tree(rng, config, 350.0);
  if (config.force_infeasible) {
    auto nodes = instance.tree.nodes();
    nodes.back().value = instance.system.total_capacity() * 1.2;
    instance.tree = dmsuc::ScenarioTree(std::move(nodes));
  }
  instance.init = dmsuc::CommitState::cold(instance.system.num_generators());
  if (config.random_init) {
    instance.init_dispatch.assign(instance.system.generators.size(), 0.0);
    for (int g = 0; g < instance.system.num_generators(); ++g) {
      const auto& gen = instance.system.generators[static_cast<std::size_t>(g)];
      auto& state = instance.init.per_gen[static_cast<std::size_t>(g)];
      if (dmsuc::uniform_below(rng, 2) == 1) {
        state.on = 1;
        state.res_up = static_cast<int>(dmsuc::uniform_below(rng, static_cast<std::uint64_t>(gen.min_up)));
        instance.init_dispatch[static_cast<std::size_t>(g)] = gen.p_min;
      } else {
        state.on = 0;
        // the base unit must stay startable or capacity cannot cover the load
        state.res_down = g == 0 ? 0
                                : static_cast<int>(dmsuc::uniform_below(
                                      rng, static_cast<std::uint64_t>(gen.min_down)));
      }
    }
  }
  return instance;
}

}  // namespace testsupport
