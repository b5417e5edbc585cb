#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dmsuc/common.hpp"
#include "dmsuc/scenario_tree.hpp"

namespace dmsuc {

// --- sample slicing --------------------------------------------------------

/// Length-T load windows drawn from the same phase of consecutive
/// cyclostationary periods.
struct SampleSlice {
  std::vector<std::vector<double>> trajectories;
  int epoch_phase = 0;

  int horizon() const {
    return trajectories.empty() ? 0 : static_cast<int>(trajectories.front().size());
  }
};

/// Cuts one length-T trajectory per complete period of `series`, aligned at
/// `epoch_phase` within the period P.
inline SampleSlice cyclostationary_slices(std::span<const double> series, int period, int horizon,
                                          int epoch_phase) {
  require(period >= 1 && horizon >= 1, "slices: period and horizon must be positive");
  require(epoch_phase >= 0 && epoch_phase < period, "slices: phase ", epoch_phase,
          " outside [0, ", period, ")");
  require(static_cast<int>(series.size()) >= period + horizon,
          "slices: series of length ", series.size(), " too short, need at least ",
          period + horizon);
  SampleSlice slice;
  slice.epoch_phase = epoch_phase;
  for (std::size_t start = static_cast<std::size_t>(epoch_phase);
       start + static_cast<std::size_t>(horizon) <= series.size();
       start += static_cast<std::size_t>(period)) {
    std::vector<double> tr(series.begin() + static_cast<std::ptrdiff_t>(start),
                           series.begin() + static_cast<std::ptrdiff_t>(start) +
                               static_cast<std::ptrdiff_t>(horizon));
    for (double v : tr)
      require(std::isfinite(v), "slices: non-finite sample in period starting at offset ", start);
    slice.trajectories.push_back(std::move(tr));
  }
  return slice;
}

// --- Lloyd-Max root quantization -------------------------------------------

struct LloydMaxResult {
  std::vector<double> centroids;    // sorted ascending
  std::vector<int> assignment;      // per input sample, index into centroids
  int iterations = 0;
  double distortion = 0.0;               // final within-cell squared distortion
  std::vector<double> distortion_trace;  // distortion at the start of each sweep
};

namespace detail {

inline int nearest_centroid(std::span<const double> centroids, double x) {
  int best = 0;
  double best_d = std::fabs(x - centroids[0]);
  for (int k = 1; k < static_cast<int>(centroids.size()); ++k) {
    double d = std::fabs(x - centroids[static_cast<std::size_t>(k)]);
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

}  // namespace detail

/// Lloyd-Max (1-D k-means) clustering of present values.  Returned centroids
/// are a fixed point of the Lloyd iteration, sorted ascending, every cell
/// non-empty.  Empty cells during iteration are re-seeded at the sample
/// farthest from all current centroids.
inline LloydMaxResult lloyd_max_roots(std::span<const double> samples, int bins,
                                      int max_iter = 1000, double tol = 1e-10) {
  require(bins >= 1, "lloyd_max: need at least one bin");
  require(!samples.empty(), "lloyd_max: empty sample set");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> distinct = sorted;
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  require(static_cast<int>(distinct.size()) >= bins, "lloyd_max: only ", distinct.size(),
          " distinct values for ", bins, " bins");

  // Deterministic spread initialization over the distinct values.
  std::vector<double> centroids(static_cast<std::size_t>(bins));
  for (int k = 0; k < bins; ++k) {
    std::size_t idx = (static_cast<std::size_t>(k) * 2 + 1) * (distinct.size() - 1) /
                      (static_cast<std::size_t>(bins) * 2);
    centroids[static_cast<std::size_t>(k)] = distinct[idx];
  }
  for (int k = 1; k < bins; ++k) {
    if (centroids[static_cast<std::size_t>(k)] <= centroids[static_cast<std::size_t>(k - 1)]) {
      auto it = std::upper_bound(distinct.begin(), distinct.end(),
                                 centroids[static_cast<std::size_t>(k - 1)]);
      centroids[static_cast<std::size_t>(k)] = *it;  // distinct count >= bins guarantees room
    }
  }

  std::vector<int> assignment(samples.size(), 0);
  std::vector<double> trace;
  int iter = 0;
  for (; iter < max_iter; ++iter) {
    std::vector<double> sum(static_cast<std::size_t>(bins), 0.0);
    std::vector<long long> count(static_cast<std::size_t>(bins), 0);
    double sweep_distortion = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      int k = detail::nearest_centroid(centroids, samples[i]);
      assignment[i] = k;
      sum[static_cast<std::size_t>(k)] += samples[i];
      ++count[static_cast<std::size_t>(k)];
      double diff = samples[i] - centroids[static_cast<std::size_t>(k)];
      sweep_distortion += diff * diff;
    }
    trace.push_back(sweep_distortion);
    double max_shift = 0.0;
    for (int k = 0; k < bins; ++k) {
      double next;
      if (count[static_cast<std::size_t>(k)] == 0) {
        // Re-seed on the sample farthest from every centroid.
        double best_d = -1.0;
        double pick = samples[0];
        for (double s : samples) {
          double d = std::fabs(s - centroids[static_cast<std::size_t>(
                                       detail::nearest_centroid(centroids, s))]);
          if (d > best_d + 1e-15 || (std::fabs(d - best_d) <= 1e-15 && s < pick)) {
            best_d = d;
            pick = s;
          }
        }
        next = pick;
        max_shift = kInfinity;  // force another sweep
      } else {
        next = sum[static_cast<std::size_t>(k)] / static_cast<double>(count[static_cast<std::size_t>(k)]);
      }
      max_shift = std::max(max_shift, std::fabs(next - centroids[static_cast<std::size_t>(k)]));
      centroids[static_cast<std::size_t>(k)] = next;
    }
    if (max_shift <= tol) break;
  }

  // Order bins ascending and refresh the assignment against the final
  // centroids so each reported cell is consistent and non-empty.
  std::sort(centroids.begin(), centroids.end());
  LloydMaxResult result;
  result.centroids = centroids;
  result.iterations = iter + 1;
  result.distortion_trace = std::move(trace);
  result.assignment.resize(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    int k = detail::nearest_centroid(result.centroids, samples[i]);
    result.assignment[i] = k;
    double diff = samples[i] - result.centroids[static_cast<std::size_t>(k)];
    result.distortion += diff * diff;
  }
  return result;
}

// --- stochastic-approximation tree fitting ----------------------------------

/// Robbins-Monro step sizes a_n = a0 / (n0 + n).
struct StepSchedule {
  double a0 = 1.0;
  double n0 = 30.0;

  double at(long long n) const { return a0 / (n0 + static_cast<double>(n)); }
};

/// Fixed tree graph: branching[t-1] children per node entering stage t.
struct TreeStructure {
  std::vector<int> branching;

  static TreeStructure binary(int horizon) {
    require(horizon >= 1, "tree structure: horizon must be >= 1");
    return {std::vector<int>(static_cast<std::size_t>(horizon - 1), 2)};
  }
  static TreeStructure single_path(int horizon) {
    require(horizon >= 1, "tree structure: horizon must be >= 1");
    return {std::vector<int>(static_cast<std::size_t>(horizon - 1), 1)};
  }
  int horizon() const { return static_cast<int>(branching.size()) + 1; }
  long long leaf_count() const {
    long long n = 1;
    for (int b : branching) n *= b;
    return n;
  }
};

struct FitOptions {
  long long iterations = 10000;
  StepSchedule step;
  std::uint64_t seed = 1;
  bool prune_zero_prob = false;  // drop never-visited subtrees instead of keeping them at prob 0
};

struct FitResult {
  ScenarioTree tree;
  std::vector<long long> leaf_counts;  // aligned with tree.leaves()
  long long n_total = 0;
  std::vector<std::string> warnings;
};

namespace detail {

/// Node skeleton for a fixed structure, values to be filled in.
inline std::vector<TreeNode> structure_skeleton(const TreeStructure& structure) {
  std::vector<TreeNode> nodes;
  nodes.push_back({0, 0, -1, 1.0, 0.0});
  int stage_begin = 0;
  int stage_count = 1;
  for (std::size_t t = 0; t < structure.branching.size(); ++t) {
    int b = structure.branching[t];
    require(b >= 1, "tree structure: branching factors must be >= 1");
    int next_begin = static_cast<int>(nodes.size());
    for (int p = stage_begin; p < stage_begin + stage_count; ++p)
      for (int c = 0; c < b; ++c)
        nodes.push_back({static_cast<int>(nodes.size()), static_cast<int>(t) + 1, p,
                         1.0 / static_cast<double>(b), 0.0});
    stage_begin = next_begin;
    stage_count *= b;
  }
  return nodes;
}

inline double empirical_quantile(std::vector<double> sorted, double p) {
  if (sorted.size() == 1) return sorted.front();
  double pos = p * static_cast<double>(sorted.size() - 1);
  std::size_t lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= sorted.size()) return sorted.back();
  double frac = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac;
}

/// Edge probabilities from leaf visit counters: p(u,v) = visits(v)/visits(u).
/// Children of never-visited nodes share the mass uniformly so the tree stays
/// normalized while all their paths keep probability zero.
inline void counters_to_edge_probs(std::vector<TreeNode>& nodes,
                                   const std::vector<std::vector<NodeId>>& children,
                                   const std::vector<long long>& node_counts) {
  for (std::size_t u = 0; u < nodes.size(); ++u) {
    if (children[u].empty()) continue;
    if (node_counts[u] > 0) {
      for (NodeId c : children[u])
        nodes[static_cast<std::size_t>(c)].edge_prob =
            static_cast<double>(node_counts[static_cast<std::size_t>(c)]) /
            static_cast<double>(node_counts[u]);
    } else {
      double uniform = 1.0 / static_cast<double>(children[u].size());
      for (NodeId c : children[u]) nodes[static_cast<std::size_t>(c)].edge_prob = uniform;
    }
  }
}

}  // namespace detail

/// Removes subtrees whose paths were never visited (probability 0); edge
/// probabilities of the survivors are untouched and still sum to 1.
inline ScenarioTree prune_zero_probability(const ScenarioTree& tree,
                                           std::span<const long long> leaf_counts) {
  auto leaves = tree.leaves();
  require(leaf_counts.size() == leaves.size(), "prune: counter length mismatch");
  std::vector<char> keep(static_cast<std::size_t>(tree.size()), 0);
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    if (leaf_counts[i] <= 0) continue;
    for (NodeId v = leaves[i]; v != -1; v = tree.node(v).parent)
      keep[static_cast<std::size_t>(v)] = 1;
  }
  require(keep[0], "prune: no visited path; cannot prune the whole tree");
  std::vector<int> remap(static_cast<std::size_t>(tree.size()), -1);
  std::vector<TreeNode> nodes;
  for (const auto& nd : tree.nodes()) {
    if (!keep[static_cast<std::size_t>(nd.id)]) continue;
    TreeNode copy = nd;
    copy.id = static_cast<int>(nodes.size());
    if (nd.parent != -1) copy.parent = remap[static_cast<std::size_t>(nd.parent)];
    remap[static_cast<std::size_t>(nd.id)] = copy.id;
    nodes.push_back(copy);
  }
  return ScenarioTree(std::move(nodes));
}

/// Fits one scenario tree to the slice by stochastic approximation: sample a
/// trajectory, move the closest path toward it with step 2*a_n, count path
/// visits, and turn the counters into conditional probabilities.  The root
/// value is pinned to `root_value` and never updated.
inline FitResult fit_tree(const SampleSlice& slice, const TreeStructure& structure,
                          double root_value, const FitOptions& options) {
  const int horizon = structure.horizon();
  require(!slice.trajectories.empty(), "fit_tree: empty slice");
  require(slice.horizon() == horizon, "fit_tree: slice horizon ", slice.horizon(),
          " != structure horizon ", horizon);
  require(options.iterations >= structure.leaf_count(), "fit_tree: need at least ",
          structure.leaf_count(), " iterations (one per path), got ", options.iterations);

  // Initialize stage values at empirical per-stage quantiles so siblings
  // spread across the conditional range.
  std::vector<TreeNode> nodes = detail::structure_skeleton(structure);
  nodes[0].value = root_value;
  for (int t = 1; t < horizon; ++t) {
    std::vector<double> stage_samples;
    stage_samples.reserve(slice.trajectories.size());
    for (const auto& tr : slice.trajectories)
      stage_samples.push_back(tr[static_cast<std::size_t>(t)]);
    std::sort(stage_samples.begin(), stage_samples.end());
    std::vector<NodeId> at_stage;
    for (const auto& nd : nodes)
      if (nd.stage == t) at_stage.push_back(nd.id);
    for (std::size_t k = 0; k < at_stage.size(); ++k) {
      double p = (static_cast<double>(k) + 0.5) / static_cast<double>(at_stage.size());
      nodes[static_cast<std::size_t>(at_stage[k])].value =
          detail::empirical_quantile(stage_samples, p);
    }
  }

  ScenarioTree tree(nodes);
  auto leaves = tree.leaves();
  std::vector<double> values(nodes.size());
  for (const auto& nd : tree.nodes()) values[static_cast<std::size_t>(nd.id)] = nd.value;
  std::vector<long long> leaf_counts(leaves.size(), 0);
  std::map<NodeId, std::size_t> leaf_pos;
  for (std::size_t i = 0; i < leaves.size(); ++i) leaf_pos[leaves[i]] = i;

  std::mt19937_64 rng(options.seed);
  std::vector<double> working = values;
  for (long long n = 1; n <= options.iterations; ++n) {
    const auto& tr =
        slice.trajectories[uniform_below(rng, static_cast<std::uint64_t>(slice.trajectories.size()))];
    // Closest path under l2; recompute distances against the working values.
    NodeId best_leaf = -1;
    double best_dist = kInfinity;
    for (NodeId leaf : leaves) {
      double dist = 0.0;
      for (NodeId v = leaf; v != -1; v = tree.node(v).parent) {
        double diff = working[static_cast<std::size_t>(v)] -
                      tr[static_cast<std::size_t>(tree.node(v).stage)];
        dist += diff * diff;
      }
      if (dist < best_dist) {
        best_dist = dist;
        best_leaf = leaf;
      }
    }
    double step = 2.0 * options.step.at(n);
    for (NodeId v = best_leaf; v != 0; v = tree.node(v).parent) {
      std::size_t i = static_cast<std::size_t>(v);
      working[i] -= step * (working[i] - tr[static_cast<std::size_t>(tree.node(v).stage)]);
    }
    ++leaf_counts[leaf_pos[best_leaf]];
  }

  // Freeze values and convert counters to conditional probabilities.
  std::vector<TreeNode> fitted = tree.nodes();
  for (auto& nd : fitted) nd.value = working[static_cast<std::size_t>(nd.id)];
  std::vector<std::vector<NodeId>> children(fitted.size());
  for (const auto& nd : fitted)
    if (nd.parent != -1) children[static_cast<std::size_t>(nd.parent)].push_back(nd.id);
  std::vector<long long> node_counts(fitted.size(), 0);
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    for (NodeId v = leaves[i]; v != -1; v = fitted[static_cast<std::size_t>(v)].parent)
      node_counts[static_cast<std::size_t>(v)] += leaf_counts[i];
  }
  detail::counters_to_edge_probs(fitted, children, node_counts);

  FitResult result{ScenarioTree(std::move(fitted)), leaf_counts, options.iterations, {}};
  long long zero_paths = static_cast<long long>(
      std::count(leaf_counts.begin(), leaf_counts.end(), 0LL));
  if (zero_paths > 0)
    result.warnings.push_back(std::to_string(zero_paths) +
                              " path(s) never visited; kept at probability 0");
  if (options.prune_zero_prob && zero_paths > 0) {
    result.tree = prune_zero_probability(result.tree, result.leaf_counts);
    std::vector<long long> surviving;
    for (long long c : leaf_counts)
      if (c > 0) surviving.push_back(c);
    result.leaf_counts = std::move(surviving);
  }
  return result;
}

// --- tree library ------------------------------------------------------------

struct LibraryEntry {
  ScenarioTree tree;
  double centroid = 0.0;               // root centroid of the quantization bin
  std::vector<long long> leaf_counts;  // visit counters, tree.leaves() order
  long long n_total = 0;
  std::uint64_t seed = 0;
};

struct LibraryParams {
  int period = 24;
  int horizon = 5;
  int bins = 3;
  long long iterations = 10000;
  StepSchedule step;
  std::uint64_t seed = 1;
};

/// Indexed collection of fitted trees keyed by (epoch index, quantization bin).
class TreeLibrary {
public:
  using Key = std::pair<int, int>;  // (epoch, bin)

  TreeLibrary() = default;
  explicit TreeLibrary(LibraryParams params) : params_(std::move(params)) {}

  const LibraryParams& params() const { return params_; }
  LibraryParams& params() { return params_; }
  const std::map<Key, LibraryEntry>& entries() const { return entries_; }

  bool has(int epoch, int bin) const { return entries_.count({epoch, bin}) > 0; }
  bool has_epoch(int epoch) const {
    auto it = entries_.lower_bound({epoch, 0});
    return it != entries_.end() && it->first.first == epoch;
  }

  const LibraryEntry& entry(int epoch, int bin) const {
    auto it = entries_.find({epoch, bin});
    require(it != entries_.end(), "library: no entry for epoch ", epoch, ", bin ", bin);
    return it->second;
  }

  void put(int epoch, int bin, LibraryEntry entry) {
    entries_[{epoch, bin}] = std::move(entry);
  }

  std::vector<int> epochs() const {
    std::vector<int> out;
    for (const auto& [key, _] : entries_)
      if (out.empty() || out.back() != key.first) out.push_back(key.first);
    return out;
  }

  int bins_for(int epoch) const {
    int n = 0;
    for (const auto& [key, _] : entries_)
      if (key.first == epoch) ++n;
    return n;
  }

  ValidationReport validate() const {
    ValidationReport report;
    for (const auto& [key, e] : entries_) {
      std::string tag = "(" + std::to_string(key.first) + "," + std::to_string(key.second) + ")";
      if (params_.bins > 0 && bins_for(key.first) != params_.bins)
        report.add("bin_count", "epoch " + std::to_string(key.first) + " has " +
                                    std::to_string(bins_for(key.first)) + " entries, expected " +
                                    std::to_string(params_.bins));
      if (e.tree.depth() != params_.horizon)
        report.add("horizon", "entry " + tag + " has depth " + std::to_string(e.tree.depth()) +
                                  ", library horizon is " + std::to_string(params_.horizon));
      if (std::fabs(e.tree.root_value() - e.centroid) > 1e-9)
        report.add("root_centroid", "entry " + tag + " root value differs from its centroid");
      auto tree_report = e.tree.validate();
      for (auto& issue : tree_report.issues)
        report.add(issue.code, "entry " + tag + ": " + issue.message);
    }
    return report;
  }

private:
  std::map<Key, LibraryEntry> entries_;
  LibraryParams params_;
};

struct LibraryBuildConfig {
  LibraryParams params;
  TreeStructure structure;          // empty -> binary with params.horizon
  std::vector<int> epochs;          // epoch indices kappa; phase = (kappa*T) mod P
  int jobs = 1;
  bool prune_zero_prob = false;
};

/// Builds the full library: for every epoch phase, quantize the present
/// values into bins and fit one tree per Voronoi cell.
inline TreeLibrary build_library(std::span<const double> series, const LibraryBuildConfig& config) {
  const LibraryParams& p = config.params;
  require(p.horizon >= 1 && p.bins >= 1 && p.iterations >= 1, "build_library: bad parameters");
  require(!config.epochs.empty(), "build_library: no epochs requested");
  TreeStructure structure =
      config.structure.branching.empty() ? TreeStructure::binary(p.horizon) : config.structure;
  require(structure.horizon() == p.horizon, "build_library: structure horizon mismatch");

  struct Task {
    int epoch;
    int bin;
    SampleSlice cell;
    double centroid;
  };
  std::vector<Task> tasks;
  for (int epoch : config.epochs) {
    int phase = static_cast<int>((static_cast<long long>(epoch) * p.horizon) % p.period);
    SampleSlice slice = cyclostationary_slices(series, p.period, p.horizon, phase);
    std::vector<double> presents;
    presents.reserve(slice.trajectories.size());
    for (const auto& tr : slice.trajectories) presents.push_back(tr.front());
    LloydMaxResult lloyd = lloyd_max_roots(presents, p.bins);
    for (int bin = 0; bin < p.bins; ++bin) {
      Task task;
      task.epoch = epoch;
      task.bin = bin;
      task.centroid = lloyd.centroids[static_cast<std::size_t>(bin)];
      task.cell.epoch_phase = phase;
      for (std::size_t i = 0; i < slice.trajectories.size(); ++i)
        if (lloyd.assignment[i] == bin) task.cell.trajectories.push_back(slice.trajectories[i]);
      tasks.push_back(std::move(task));
    }
  }

  std::vector<LibraryEntry> fitted(tasks.size());
  parallel_for(tasks.size(), config.jobs, [&](std::size_t i) {
    const Task& task = tasks[i];
    FitOptions options;
    options.iterations = p.iterations;
    options.step = p.step;
    options.seed = mix_seed(p.seed, static_cast<std::uint64_t>(task.epoch),
                            static_cast<std::uint64_t>(task.bin));
    options.prune_zero_prob = config.prune_zero_prob;
    FitResult fit = fit_tree(task.cell, structure, task.centroid, options);
    fitted[i] = LibraryEntry{std::move(fit.tree), task.centroid, std::move(fit.leaf_counts),
                             fit.n_total, options.seed};
  });

  TreeLibrary library(p);
  for (std::size_t i = 0; i < tasks.size(); ++i)
    library.put(tasks[i].epoch, tasks[i].bin, std::move(fitted[i]));
  return library;
}

// --- here-and-now and wait-and-see updates -----------------------------------

/// Picks the epoch's tree whose root centroid is nearest to the observed
/// present (ties toward the lower bin index) and swaps the root value for the
/// present.  Returns (augmented tree, chosen bin).
inline std::pair<ScenarioTree, int> select_and_augment(const TreeLibrary& library, int epoch,
                                                       double present) {
  require(library.has_epoch(epoch), "select_and_augment: library has no entries for epoch ", epoch);
  int best_bin = -1;
  double best_dist = kInfinity;
  for (const auto& [key, entry] : library.entries()) {
    if (key.first != epoch) continue;
    double d = std::fabs(entry.centroid - present);
    if (d < best_dist) {
      best_dist = d;
      best_bin = key.second;
    }
  }
  return {library.entry(epoch, best_bin).tree.with_root_value(present), best_bin};
}

/// One additional stochastic-approximation step with the fully realized
/// trajectory; returns a new library with entry (epoch, bin) replaced.
/// `n_step` is the iteration index used for the step size (pass the entry's
/// n_total + 1 to continue its schedule).
inline TreeLibrary wait_and_see_update(const TreeLibrary& library, int epoch, int bin,
                                       std::span<const double> realized,
                                       const StepSchedule& step, long long n_step) {
  const LibraryEntry& entry = library.entry(epoch, bin);
  const ScenarioTree& tree = entry.tree;
  require(static_cast<int>(realized.size()) == tree.depth(), "wait_and_see: trajectory length ",
          realized.size(), " != tree depth ", tree.depth());

  auto [leaf, dist] = tree.closest_path(realized);
  (void)dist;
  std::vector<TreeNode> nodes = tree.nodes();
  double a = 2.0 * step.at(n_step);
  for (NodeId v = leaf; v != 0; v = tree.node(v).parent) {
    std::size_t i = static_cast<std::size_t>(v);
    nodes[i].value -= a * (nodes[i].value - realized[static_cast<std::size_t>(tree.node(v).stage)]);
  }

  auto leaves = tree.leaves();
  std::vector<long long> counts = entry.leaf_counts;
  require(counts.size() == leaves.size(), "wait_and_see: entry counters out of sync");
  for (std::size_t i = 0; i < leaves.size(); ++i)
    if (leaves[i] == leaf) ++counts[i];

  std::vector<std::vector<NodeId>> children(nodes.size());
  for (const auto& nd : nodes)
    if (nd.parent != -1) children[static_cast<std::size_t>(nd.parent)].push_back(nd.id);
  std::vector<long long> node_counts(nodes.size(), 0);
  for (std::size_t i = 0; i < leaves.size(); ++i)
    for (NodeId v = leaves[i]; v != -1; v = nodes[static_cast<std::size_t>(v)].parent)
      node_counts[static_cast<std::size_t>(v)] += counts[i];
  detail::counters_to_edge_probs(nodes, children, node_counts);

  TreeLibrary updated = library;
  updated.put(epoch, bin,
              LibraryEntry{ScenarioTree(std::move(nodes)), entry.centroid, std::move(counts),
                           entry.n_total + 1, entry.seed});
  return updated;
}

// --- residual-process composition ---------------------------------------------

/// One-step-ahead forecaster h over a fixed-length state of past values
/// (most recent first).  Must be deterministic.
struct Forecaster {
  std::function<double(std::span<const double>)> h;
  int state_len = 1;

  /// h(beta) = beta_1: tomorrow equals today.
  static Forecaster persistence() {
    return {[](std::span<const double> beta) { return beta[0]; }, 1};
  }
  /// h(beta) = value one period earlier.
  static Forecaster seasonal_persistence(int period) {
    require(period >= 1, "forecaster: period must be >= 1");
    return {[period](std::span<const double> beta) {
              return beta[static_cast<std::size_t>(period - 1)];
            },
            period};
  }
  /// h(beta) = phi * beta_1.
  static Forecaster ar1(double phi) {
    return {[phi](std::span<const double> beta) { return phi * beta[0]; }, 1};
  }
};

/// Converts a residual tree into a load tree via the forward recursion
/// xi_v = h(beta_parent) + zeta_v with the shift-register state update.
/// The root load value is the first entry of `initial_state` (the observed
/// present); graph and probabilities are preserved exactly.
inline ScenarioTree compose_residual_tree(const ScenarioTree& residual_tree,
                                          const Forecaster& forecaster,
                                          std::span<const double> initial_state) {
  require(static_cast<bool>(forecaster.h), "compose_residual_tree: forecaster has no function");
  require(static_cast<int>(initial_state.size()) == forecaster.state_len,
          "compose_residual_tree: state length ", initial_state.size(), " != forecaster state_len ",
          forecaster.state_len);

  std::vector<double> values(static_cast<std::size_t>(residual_tree.size()));
  std::vector<std::vector<double>> states(static_cast<std::size_t>(residual_tree.size()));
  values[0] = initial_state[0];
  states[0].assign(initial_state.begin(), initial_state.end());
  // Nodes are in BFS order, so parents are always processed first.
  for (const auto& nd : residual_tree.nodes()) {
    if (nd.id == 0) continue;
    const auto& parent_state = states[static_cast<std::size_t>(nd.parent)];
    double xi = forecaster.h(parent_state) + nd.value;
    values[static_cast<std::size_t>(nd.id)] = xi;
    auto& state = states[static_cast<std::size_t>(nd.id)];
    state.resize(parent_state.size());
    state[0] = xi;
    std::copy(parent_state.begin(), parent_state.end() - 1, state.begin() + 1);
  }
  return residual_tree.with_values(values);
}

// --- library serialization -----------------------------------------------------

/// Writes `index.json` plus one tree file per entry into `dir`.
inline void save_library(const TreeLibrary& library, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json index;
  const LibraryParams& p = library.params();
  index["params"] = {{"period", p.period},     {"horizon", p.horizon},
                     {"bins", p.bins},         {"iterations", p.iterations},
                     {"step_a0", p.step.a0},   {"step_n0", p.step.n0},
                     {"seed", p.seed}};
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& [key, entry] : library.entries()) {
    std::string file =
        "tree_k" + std::to_string(key.first) + "_b" + std::to_string(key.second) + ".json";
    TreeMeta meta;
    meta.epoch = key.first;
    meta.bin = key.second;
    meta.root_centroid = entry.centroid;
    meta.n_total = entry.n_total;
    meta.leaf_counts = entry.leaf_counts;
    meta.seed = entry.seed;
    save_tree(entry.tree, dir / file, meta);
    entries.push_back({{"epoch", key.first},
                       {"bin", key.second},
                       {"centroid", entry.centroid},
                       {"n_total", entry.n_total},
                       {"seed", entry.seed},
                       {"file", file}});
  }
  index["entries"] = std::move(entries);
  std::ofstream out(dir / "index.json");
  require(out.good(), "cannot open ", (dir / "index.json").string(), " for writing");
  out << index.dump(2) << "\n";
  require(out.good(), "failed writing library index");
}

inline TreeLibrary load_library(const std::filesystem::path& dir) {
  std::ifstream in(dir / "index.json");
  require(in.good(), "cannot open library index ", (dir / "index.json").string());
  nlohmann::json index;
  try {
    in >> index;
  } catch (const std::exception& e) {
    fail("malformed library index: ", e.what());
  }
  LibraryParams params;
  const auto& pj = index.at("params");
  params.period = pj.at("period").get<int>();
  params.horizon = pj.at("horizon").get<int>();
  params.bins = pj.at("bins").get<int>();
  params.iterations = pj.at("iterations").get<long long>();
  params.step.a0 = pj.at("step_a0").get<double>();
  params.step.n0 = pj.at("step_n0").get<double>();
  params.seed = pj.at("seed").get<std::uint64_t>();
  TreeLibrary library(params);
  for (const auto& ej : index.at("entries")) {
    auto [tree, meta] = load_tree(dir / ej.at("file").get<std::string>());
    LibraryEntry entry;
    entry.tree = std::move(tree);
    entry.centroid = ej.at("centroid").get<double>();
    entry.n_total = ej.at("n_total").get<long long>();
    entry.seed = ej.at("seed").get<std::uint64_t>();
    if (meta.leaf_counts) entry.leaf_counts = *meta.leaf_counts;
    library.put(ej.at("epoch").get<int>(), ej.at("bin").get<int>(), std::move(entry));
  }
  return library;
}

}  // namespace dmsuc
