#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <random>

#include "dmsuc/scenario_tree.hpp"
#include "support/generators.hpp"

using namespace dmsuc;

namespace {

ScenarioTree binary_tree(int depth, double edge_prob = 0.5) {
  std::vector<TreeNode> nodes;
  nodes.push_back({0, 0, -1, 1.0, 100.0});
  std::vector<int> frontier{0};
  for (int stage = 1; stage < depth; ++stage) {
    std::vector<int> next;
    for (int parent : frontier) {
      for (int c = 0; c < 2; ++c) {
        int id = static_cast<int>(nodes.size());
        nodes.push_back({id, stage, parent, edge_prob, 100.0 + 10.0 * id});
        next.push_back(id);
      }
    }
    frontier = std::move(next);
  }
  return ScenarioTree(std::move(nodes));
}

ScenarioTree single_path_tree(std::vector<double> values) {
  std::vector<TreeNode> nodes;
  for (std::size_t i = 0; i < values.size(); ++i)
    nodes.push_back({static_cast<int>(i), static_cast<int>(i),
                     i == 0 ? -1 : static_cast<int>(i) - 1, 1.0, values[i]});
  return ScenarioTree(std::move(nodes));
}

}  // namespace

TEST_CASE("root path probability is one") {
  auto tree = binary_tree(4);
  CHECK(tree.path_probability(0) == 1.0);
}

TEST_CASE("binary tree with half probabilities") {
  auto tree = binary_tree(3, 0.5);
  for (NodeId leaf : tree.leaves()) CHECK(tree.path_probability(leaf) == Catch::Approx(0.25));
}

TEST_CASE("path probability matches edge product oracle on random trees") {
  std::mt19937_64 rng(42);
  for (int i = 0; i < 50; ++i) {
    auto tree = testsupport::random_tree(rng);
    for (NodeId leaf : tree.leaves()) {
      double expected = testsupport::edge_product_oracle(tree, leaf);
      CHECK(std::fabs(tree.path_probability(leaf) - expected) < 1e-12);
    }
  }
}

TEST_CASE("leaf probabilities of a valid tree sum to one") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 50; ++i) {
    auto tree = testsupport::random_tree(rng);
    REQUIRE(tree.validate().ok());
    double sum = 0.0;
    for (NodeId leaf : tree.leaves()) sum += tree.path_probability(leaf);
    CHECK(std::fabs(sum - 1.0) < 1e-9);
  }
}

TEST_CASE("path probability non-increasing toward the leaves") {
  std::mt19937_64 rng(11);
  auto tree = testsupport::random_tree(rng);
  for (NodeId leaf : tree.leaves()) {
    double prev = 1.0;
    auto path = tree.path_to(leaf);
    for (NodeId v : path.node_ids) {
      double p = tree.path_probability(v);
      CHECK(p <= prev + 1e-15);
      prev = p;
    }
  }
}

TEST_CASE("navigation on a single-path tree") {
  auto tree = single_path_tree({10.0, 20.0, 30.0});
  auto leaves = tree.leaves();
  REQUIRE(leaves.size() == 1);
  auto path = tree.path_to(leaves[0]);
  CHECK(path.length() == 3);
  CHECK(path.values == std::vector<double>{10.0, 20.0, 30.0});
  CHECK(path.probability == 1.0);
  CHECK(tree.parent(0) == -1);
  CHECK(tree.parent(1) == 0);
  CHECK(tree.children(0) == std::vector<NodeId>{1});
}

TEST_CASE("binary depth-5 node and leaf counts") {
  auto tree = binary_tree(5);
  CHECK(tree.size() == 31);
  CHECK(tree.leaves().size() == 16);
}

TEST_CASE("path_to rejects non-leaves") {
  auto tree = binary_tree(3);
  CHECK_THROWS_AS(tree.path_to(0), Error);
}

TEST_CASE("unknown node id raises a lookup error") {
  auto tree = binary_tree(3);
  CHECK_THROWS_AS(tree.path_probability(99), Error);
  CHECK_THROWS_AS(tree.node(-1), Error);
}

TEST_CASE("closest path finds verbatim trajectories at distance zero") {
  std::mt19937_64 rng(3);
  auto tree = testsupport::random_tree(rng);
  for (NodeId leaf : tree.leaves()) {
    auto path = tree.path_to(leaf);
    auto [found, dist] = tree.closest_path(path.values);
    CHECK(found == leaf);
    CHECK(dist == 0.0);
  }
}

TEST_CASE("closest path two-leaf example") {
  std::vector<TreeNode> nodes{{0, 0, -1, 1.0, 0.0},
                              {1, 1, 0, 0.5, 0.0},
                              {2, 1, 0, 0.5, 10.0}};
  // paths [0,0] and [0,10]; trajectory [1,1] is closer to [0,0]
  ScenarioTree tree(std::move(nodes));
  auto [leaf, dist] = tree.closest_path(std::vector<double>{1.0, 1.0});
  CHECK(leaf == 1);
  CHECK(dist == Catch::Approx(std::sqrt(2.0)));
}

TEST_CASE("closest path matches exhaustive enumeration") {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 100; ++i) {
    auto tree = testsupport::random_tree(rng);
    std::vector<double> traj(static_cast<std::size_t>(tree.depth()));
    for (auto& v : traj) v = 100.0 + 100.0 * uniform_unit(rng);
    auto [leaf, dist] = tree.closest_path(traj);
    auto [oracle_leaf, oracle_dist] = testsupport::closest_path_oracle(tree, traj);
    CHECK(leaf == oracle_leaf);
    CHECK(std::fabs(dist - oracle_dist) < 1e-10);
  }
}

TEST_CASE("closest path rejects length mismatches") {
  auto tree = binary_tree(3);
  CHECK_THROWS_AS(tree.closest_path(std::vector<double>{1.0, 2.0}), Error);
}

TEST_CASE("validate accepts a well-formed binary tree") {
  CHECK(binary_tree(4).validate().ok());
}

TEST_CASE("validate flags probabilities that do not sum to one") {
  std::vector<TreeNode> nodes{{0, 0, -1, 1.0, 1.0},
                              {1, 1, 0, 0.4, 1.0},
                              {2, 1, 0, 0.5, 1.0}};
  auto report = ScenarioTree(std::move(nodes)).validate();
  REQUIRE_FALSE(report.ok());
  CHECK(report.issues[0].code == "edge_prob_sum");
  CHECK(report.issues[0].message.find("node 0") != std::string::npos);
}

TEST_CASE("validate flags a leaf above the final stage") {
  std::vector<TreeNode> nodes{{0, 0, -1, 1.0, 1.0},
                              {1, 1, 0, 1.0, 1.0},
                              {2, 2, 1, 0.5, 1.0},
                              {3, 2, 1, 0.5, 1.0},
                              {4, 1, 0, 0.0, 1.0}};  // stray stage-1 leaf
  auto report = ScenarioTree(std::move(nodes)).validate();
  bool found = false;
  for (const auto& issue : report.issues)
    if (issue.code == "leaf_depth") found = true;
  CHECK(found);
}

TEST_CASE("with_root_value only changes the root") {
  auto tree = binary_tree(3);
  auto updated = tree.with_root_value(555.0);
  CHECK(updated.root_value() == 555.0);
  for (int id = 1; id < tree.size(); ++id) {
    CHECK(updated.node(id).value == tree.node(id).value);
    CHECK(updated.node(id).edge_prob == tree.node(id).edge_prob);
  }
}

TEST_CASE("tree serialization round-trips at full precision") {
  std::mt19937_64 rng(5);
  auto tree = testsupport::random_tree(rng);
  TreeMeta meta;
  meta.epoch = 2;
  meta.bin = 1;
  meta.root_centroid = tree.root_value();
  meta.leaf_counts = std::vector<long long>(tree.leaves().size(), 7);
  meta.n_total = 1000;

  auto path = std::filesystem::temp_directory_path() / "dmsuc_tree_roundtrip.json";
  save_tree(tree, path, meta);
  auto [loaded, loaded_meta] = load_tree(path);
  std::filesystem::remove(path);

  REQUIRE(loaded.size() == tree.size());
  for (int id = 0; id < tree.size(); ++id) {
    CHECK(loaded.node(id).value == tree.node(id).value);
    CHECK(loaded.node(id).edge_prob == tree.node(id).edge_prob);
    CHECK(loaded.node(id).stage == tree.node(id).stage);
    CHECK(loaded.node(id).parent == tree.node(id).parent);
  }
  CHECK(loaded_meta.epoch == meta.epoch);
  CHECK(loaded_meta.bin == meta.bin);
  CHECK(loaded_meta.leaf_counts == meta.leaf_counts);
}
