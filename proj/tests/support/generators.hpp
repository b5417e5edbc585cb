#pragma once

// Seeded random generators and independent oracles shared by the unit and
// acceptance suites.  Oracles here deliberately avoid the library's own code
// paths: path probabilities are recomputed by explicit enumeration, closest
// paths by brute force over all leaves, and so on.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "dmsuc/scenario_tree.hpp"

namespace testsupport {

/// Random valid tree: uniform depth, normalized positive edge probabilities.
inline dmsuc::ScenarioTree random_tree(std::mt19937_64& rng, int max_depth = 6,
                                       int max_branch = 3) {
  int depth = 2 + static_cast<int>(dmsuc::uniform_below(rng, static_cast<std::uint64_t>(max_depth - 1)));
  std::vector<dmsuc::TreeNode> nodes;
  nodes.push_back({0, 0, -1, 1.0, 100.0 + 50.0 * dmsuc::uniform_unit(rng)});
  std::vector<int> frontier{0};
  for (int stage = 1; stage < depth; ++stage) {
    std::vector<int> next;
    for (int parent : frontier) {
      int branch = 1 + static_cast<int>(dmsuc::uniform_below(rng, static_cast<std::uint64_t>(max_branch)));
      std::vector<double> weights(static_cast<std::size_t>(branch));
      double total = 0.0;
      for (auto& w : weights) {
        w = 0.05 + dmsuc::uniform_unit(rng);
        total += w;
      }
      for (int c = 0; c < branch; ++c) {
        dmsuc::TreeNode node;
        node.id = static_cast<int>(nodes.size());
        node.stage = stage;
        node.parent = parent;
        node.edge_prob = weights[static_cast<std::size_t>(c)] / total;
        node.value = 100.0 + 100.0 * dmsuc::uniform_unit(rng);
        next.push_back(node.id);
        nodes.push_back(node);
      }
    }
    frontier = std::move(next);
  }
  return dmsuc::ScenarioTree(std::move(nodes));
}

/// Oracle: multiply edge probabilities along an explicitly enumerated
/// root-to-node chain (no recursion shared with the library).
inline double edge_product_oracle(const dmsuc::ScenarioTree& tree, dmsuc::NodeId id) {
  std::vector<dmsuc::NodeId> chain;
  for (dmsuc::NodeId v = id; v != -1; v = tree.node(v).parent) chain.push_back(v);
  std::reverse(chain.begin(), chain.end());
  double p = 1.0;
  for (std::size_t i = 1; i < chain.size(); ++i) p *= tree.node(chain[i]).edge_prob;
  return p;
}

/// Oracle: brute-force closest path over every root-to-leaf value vector.
inline std::pair<dmsuc::NodeId, double> closest_path_oracle(const dmsuc::ScenarioTree& tree,
                                                            const std::vector<double>& traj) {
  dmsuc::NodeId best = -1;
  double best_dist = dmsuc::kInfinity;
  for (dmsuc::NodeId leaf : tree.leaves()) {
    std::vector<double> values;
    for (dmsuc::NodeId v = leaf; v != -1; v = tree.node(v).parent)
      values.push_back(tree.node(v).value);
    std::reverse(values.begin(), values.end());
    double dist = 0.0;
    for (std::size_t t = 0; t < values.size(); ++t) {
      double diff = values[t] - traj[t];
      dist += diff * diff;
    }
    dist = std::sqrt(dist);
    if (dist < best_dist - 1e-15) {
      best_dist = dist;
      best = leaf;
    }
  }
  return {best, best_dist};
}

}  // namespace testsupport
