#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dmsuc/common.hpp"

namespace dmsuc {

using NodeId = int;

/// Distance used when matching a trajectory against tree paths.
enum class PathMetric { L2, L1 };

struct TreeNode {
  NodeId id = 0;
  int stage = 0;
  NodeId parent = -1;      // -1 for the root
  double edge_prob = 1.0;  // conditional probability of the edge from parent; 1 at root
  double value = 0.0;      // MW (load trees) or MW residual (residual trees)
};

/// One root-to-leaf realization: node ids, values, and the path probability.
struct ScenarioPath {
  std::vector<NodeId> node_ids;
  std::vector<double> values;
  double probability = 1.0;

  int length() const { return static_cast<int>(node_ids.size()); }
};

/// Rooted tree over stages 0..T-1 with conditional edge probabilities.
///
/// Node ids are dense integers in breadth-first order with root 0, so the
/// parent of every node has a smaller id and nodes of one stage are
/// contiguous.  Instances are immutable after construction; the wait-and-see
/// and here-and-now updates build new trees.
class ScenarioTree {
public:
  ScenarioTree() = default;

  /// Builds a tree from a node list.  Structural requirements (dense BFS
  /// ids, parent stage consistency) are enforced here; probabilistic and
  /// depth invariants are checked by validate() and reported, not thrown.
  explicit ScenarioTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {
    require(!nodes_.empty(), "scenario tree: empty node list");
    const int n = static_cast<int>(nodes_.size());
    children_.assign(n, {});
    for (int i = 0; i < n; ++i) {
      const TreeNode& nd = nodes_[i];
      require(nd.id == i, "scenario tree: node ids must be dense and in order, got id ",
              nd.id, " at index ", i);
      if (i == 0) {
        require(nd.parent == -1 && nd.stage == 0, "scenario tree: node 0 must be the stage-0 root");
      } else {
        require(nd.parent >= 0 && nd.parent < i,
                "scenario tree: node ", i, " must have a parent with a smaller id (BFS order)");
        require(nd.stage == nodes_[nd.parent].stage + 1,
                "scenario tree: node ", i, " stage must be parent stage + 1");
        children_[nd.parent].push_back(i);
      }
      depth_ = std::max(depth_, nd.stage + 1);
    }
  }

  int size() const { return static_cast<int>(nodes_.size()); }
  int depth() const { return depth_; }  // T: number of stages

  const TreeNode& node(NodeId id) const {
    require(id >= 0 && id < size(), "scenario tree: unknown node id ", id);
    return nodes_[static_cast<std::size_t>(id)];
  }

  const std::vector<TreeNode>& nodes() const { return nodes_; }

  double root_value() const { return nodes_.front().value; }

  bool is_leaf(NodeId id) const { return children(id).empty(); }

  /// Parent id; -1 for the root.
  NodeId parent(NodeId id) const { return node(id).parent; }

  const std::vector<NodeId>& children(NodeId id) const {
    node(id);  // bounds check
    return children_[static_cast<std::size_t>(id)];
  }

  std::vector<NodeId> leaves() const {
    std::vector<NodeId> out;
    for (const auto& nd : nodes_)
      if (children_[static_cast<std::size_t>(nd.id)].empty()) out.push_back(nd.id);
    return out;
  }

  std::vector<NodeId> stage_nodes(int stage) const {
    std::vector<NodeId> out;
    for (const auto& nd : nodes_)
      if (nd.stage == stage) out.push_back(nd.id);
    return out;
  }

  /// pi_v: probability of the path from the root to `id` (1 at the root).
  double path_probability(NodeId id) const {
    double p = 1.0;
    for (NodeId v = id; v != 0; v = node(v).parent) p *= node(v).edge_prob;
    return p;
  }

  /// Unique root-to-leaf path ending at `leaf`.
  ScenarioPath path_to(NodeId leaf) const {
    require(is_leaf(leaf), "path_to: node ", leaf, " is not a leaf");
    ScenarioPath path;
    for (NodeId v = leaf; v != -1; v = node(v).parent) {
      path.node_ids.push_back(v);
      path.values.push_back(node(v).value);
      if (v != 0) path.probability *= node(v).edge_prob;
    }
    std::reverse(path.node_ids.begin(), path.node_ids.end());
    std::reverse(path.values.begin(), path.values.end());
    return path;
  }

  /// Leaf whose root-to-leaf value vector is closest to `trajectory`.
  /// Ties break toward the smallest leaf id.  Returned distance is the
  /// metric value (not squared).
  std::pair<NodeId, double> closest_path(std::span<const double> trajectory,
                                         PathMetric metric = PathMetric::L2) const {
    require(static_cast<int>(trajectory.size()) == depth_,
            "closest_path: trajectory length ", trajectory.size(), " != tree depth ", depth_);
    NodeId best = -1;
    double best_dist = kInfinity;
    // Accumulate the distance contribution along each ancestor chain.
    std::vector<double> partial(nodes_.size(), 0.0);
    for (const auto& nd : nodes_) {
      double diff = nd.value - trajectory[static_cast<std::size_t>(nd.stage)];
      double contrib = metric == PathMetric::L2 ? diff * diff : std::fabs(diff);
      partial[static_cast<std::size_t>(nd.id)] =
          (nd.id == 0 ? 0.0 : partial[static_cast<std::size_t>(nd.parent)]) + contrib;
      if (children_[static_cast<std::size_t>(nd.id)].empty()) {
        double dist = partial[static_cast<std::size_t>(nd.id)];
        if (dist < best_dist) {
          best_dist = dist;
          best = nd.id;
        }
      }
    }
    return {best, metric == PathMetric::L2 ? std::sqrt(best_dist) : best_dist};
  }

  /// Checks the probabilistic and structural invariants; every violation is
  /// reported, an empty report means the tree is valid.
  ValidationReport validate(double tol = 1e-9) const {
    ValidationReport report;
    for (const auto& nd : nodes_) {
      if (nd.id != 0 && (nd.edge_prob < -tol || nd.edge_prob > 1.0 + tol))
        report.add("edge_prob_range",
                   "edge probability " + std::to_string(nd.edge_prob) + " of node " +
                       std::to_string(nd.id) + " outside [0,1]");
      if (!std::isfinite(nd.value))
        report.add("value_finite", "node " + std::to_string(nd.id) + " has non-finite value");
      const auto& kids = children_[static_cast<std::size_t>(nd.id)];
      if (!kids.empty()) {
        double sum = 0.0;
        for (NodeId c : kids) sum += nodes_[static_cast<std::size_t>(c)].edge_prob;
        if (std::fabs(sum - 1.0) > tol)
          report.add("edge_prob_sum", "children of node " + std::to_string(nd.id) +
                                          " have edge probabilities summing to " +
                                          std::to_string(sum));
      } else if (nd.stage != depth_ - 1) {
        report.add("leaf_depth", "leaf " + std::to_string(nd.id) + " at stage " +
                                     std::to_string(nd.stage) + ", expected " +
                                     std::to_string(depth_ - 1));
      }
    }
    return report;
  }

  /// Copy with the root value replaced (here-and-now update); everything
  /// else is untouched.
  ScenarioTree with_root_value(double value) const {
    std::vector<TreeNode> nodes = nodes_;
    nodes.front().value = value;
    return ScenarioTree(std::move(nodes));
  }

  /// Copy with all node values replaced; graph and probabilities preserved.
  ScenarioTree with_values(std::span<const double> values) const {
    require(values.size() == nodes_.size(), "with_values: expected ", nodes_.size(),
            " values, got ", values.size());
    std::vector<TreeNode> nodes = nodes_;
    for (std::size_t i = 0; i < nodes.size(); ++i) nodes[i].value = values[i];
    return ScenarioTree(std::move(nodes));
  }

private:
  std::vector<TreeNode> nodes_;
  std::vector<std::vector<NodeId>> children_;
  int depth_ = 0;
};

/// Optional metadata carried in tree files: which library slot the tree came
/// from and the fitting counters needed to continue stochastic updates.
struct TreeMeta {
  std::optional<int> epoch;
  std::optional<int> bin;
  std::optional<double> root_centroid;
  std::optional<long long> n_total;                  // fitting iterations so far
  std::optional<std::vector<long long>> leaf_counts;  // visit counters, leaf-id order
  std::optional<std::uint64_t> seed;
};

// --- serialization --------------------------------------------------------

inline nlohmann::json tree_to_json(const ScenarioTree& tree, const TreeMeta& meta = {}) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& nd : tree.nodes()) {
    nodes.push_back({{"id", nd.id},
                     {"stage", nd.stage},
                     {"parent", nd.parent},
                     {"edge_prob", nd.edge_prob},
                     {"value", nd.value}});
  }
  nlohmann::json j{{"T", tree.depth()}, {"nodes", std::move(nodes)}};
  nlohmann::json m = nlohmann::json::object();
  if (meta.epoch) m["epoch"] = *meta.epoch;
  if (meta.bin) m["bin"] = *meta.bin;
  if (meta.root_centroid) m["root_centroid"] = *meta.root_centroid;
  if (meta.n_total) m["n_total"] = *meta.n_total;
  if (meta.leaf_counts) m["leaf_counts"] = *meta.leaf_counts;
  if (meta.seed) m["seed"] = *meta.seed;
  j["meta"] = std::move(m);
  return j;
}

inline std::pair<ScenarioTree, TreeMeta> tree_from_json(const nlohmann::json& j) {
  require(j.contains("nodes") && j["nodes"].is_array(), "tree file: missing nodes array");
  std::vector<TreeNode> nodes;
  for (const auto& nj : j["nodes"]) {
    TreeNode nd;
    nd.id = nj.at("id").get<int>();
    nd.stage = nj.at("stage").get<int>();
    nd.parent = nj.at("parent").get<int>();
    nd.edge_prob = nj.at("edge_prob").get<double>();
    nd.value = nj.at("value").get<double>();
    nodes.push_back(nd);
  }
  ScenarioTree tree(std::move(nodes));
  if (j.contains("T"))
    require(j["T"].get<int>() == tree.depth(), "tree file: T field (", j["T"].get<int>(),
            ") disagrees with node stages (depth ", tree.depth(), ")");
  TreeMeta meta;
  if (j.contains("meta")) {
    const auto& m = j["meta"];
    if (m.contains("epoch")) meta.epoch = m["epoch"].get<int>();
    if (m.contains("bin")) meta.bin = m["bin"].get<int>();
    if (m.contains("root_centroid")) meta.root_centroid = m["root_centroid"].get<double>();
    if (m.contains("n_total")) meta.n_total = m["n_total"].get<long long>();
    if (m.contains("leaf_counts")) meta.leaf_counts = m["leaf_counts"].get<std::vector<long long>>();
    if (m.contains("seed")) meta.seed = m["seed"].get<std::uint64_t>();
  }
  return {std::move(tree), std::move(meta)};
}

inline void save_tree(const ScenarioTree& tree, const std::filesystem::path& path,
                      const TreeMeta& meta = {}) {
  std::ofstream out(path);
  require(out.good(), "cannot open ", path.string(), " for writing");
  out << tree_to_json(tree, meta).dump(2) << "\n";
  require(out.good(), "failed writing ", path.string());
}

inline std::pair<ScenarioTree, TreeMeta> load_tree(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open tree file ", path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    fail("malformed tree file ", path.string(), ": ", e.what());
  }
  return tree_from_json(j);
}

}  // namespace dmsuc
