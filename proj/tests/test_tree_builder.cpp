#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <random>

#include "dmsuc/tree_builder.hpp"
#include "support/generators.hpp"

using namespace dmsuc;

namespace {

SampleSlice constant_slice(double value, int horizon, int count) {
  SampleSlice slice;
  for (int i = 0; i < count; ++i)
    slice.trajectories.push_back(std::vector<double>(static_cast<std::size_t>(horizon), value));
  return slice;
}

/// Independent 1-D k-means used as the offline oracle for the fit tests.
std::vector<double> offline_two_means(std::vector<double> samples) {
  double c0 = -0.5, c1 = 0.5;
  for (int iter = 0; iter < 200; ++iter) {
    double s0 = 0, s1 = 0;
    long long n0 = 0, n1 = 0;
    for (double x : samples) {
      if (std::fabs(x - c0) <= std::fabs(x - c1)) {
        s0 += x;
        ++n0;
      } else {
        s1 += x;
        ++n1;
      }
    }
    double nc0 = n0 ? s0 / static_cast<double>(n0) : c0;
    double nc1 = n1 ? s1 / static_cast<double>(n1) : c1;
    if (std::fabs(nc0 - c0) < 1e-12 && std::fabs(nc1 - c1) < 1e-12) break;
    c0 = nc0;
    c1 = nc1;
  }
  if (c0 > c1) std::swap(c0, c1);
  return {c0, c1};
}

}  // namespace

TEST_CASE("slices of an exactly periodic series") {
  std::vector<double> series;
  for (int rep = 0; rep < 4; ++rep)
    for (int h = 1; h <= 24; ++h) series.push_back(h);
  auto slice = cyclostationary_slices(series, 24, 5, 0);
  REQUIRE(slice.trajectories.size() == 4);
  for (const auto& tr : slice.trajectories)
    CHECK(tr == std::vector<double>{1, 2, 3, 4, 5});

  auto shifted = cyclostationary_slices(series, 24, 5, 6);
  for (const auto& tr : shifted.trajectories)
    CHECK(tr == std::vector<double>{7, 8, 9, 10, 11});
}

TEST_CASE("slices count one trajectory per complete period") {
  std::vector<double> series(24 * 16, 1.0);
  auto slice = cyclostationary_slices(series, 24, 5, 0);
  CHECK(slice.trajectories.size() == 16);
}

TEST_CASE("too-short series is rejected") {
  std::vector<double> series(24 + 5 - 1, 1.0);
  CHECK_THROWS_AS(cyclostationary_slices(series, 24, 5, 0), Error);
}

TEST_CASE("lloyd-max with one bin returns the sample mean") {
  std::vector<double> samples{100.0, 100.0, 100.0};
  auto result = lloyd_max_roots(samples, 1);
  REQUIRE(result.centroids.size() == 1);
  CHECK(result.centroids[0] == 100.0);

  std::mt19937_64 rng(1);
  std::vector<double> noisy(1000);
  double mean = 0.0;
  for (auto& v : noisy) {
    v = uniform_unit(rng) * 50.0;
    mean += v;
  }
  mean /= static_cast<double>(noisy.size());
  auto r2 = lloyd_max_roots(noisy, 1);
  CHECK(std::fabs(r2.centroids[0] - mean) < 1e-9);
}

TEST_CASE("lloyd-max on uniform samples approaches the analytic fixed point") {
  std::mt19937_64 rng(2024);
  std::vector<double> samples(100000);
  for (auto& v : samples) v = uniform_unit(rng);
  auto result = lloyd_max_roots(samples, 2);
  REQUIRE(result.centroids.size() == 2);
  CHECK(std::fabs(result.centroids[0] - 0.25) < 0.01);
  CHECK(std::fabs(result.centroids[1] - 0.75) < 0.01);
  for (int k = 0; k < 2; ++k)
    CHECK(std::count(result.assignment.begin(), result.assignment.end(), k) > 0);
}

TEST_CASE("lloyd-max distortion is non-increasing across iterations") {
  std::mt19937_64 rng(5);
  std::vector<double> samples(5000);
  for (auto& v : samples) v = uniform_unit(rng) * 100.0 + (rng() % 2 ? 500.0 : 0.0);
  auto result = lloyd_max_roots(samples, 4);
  for (std::size_t i = 1; i < result.distortion_trace.size(); ++i)
    CHECK(result.distortion_trace[i] <= result.distortion_trace[i - 1] + 1e-9);
}

TEST_CASE("lloyd-max needs enough distinct values") {
  std::vector<double> samples{5.0, 5.0, 5.0, 7.0};
  CHECK_THROWS_AS(lloyd_max_roots(samples, 3), Error);
}

TEST_CASE("lloyd-max centroids are a fixed point of the iteration") {
  std::mt19937_64 rng(77);
  std::vector<double> samples(2000);
  for (auto& v : samples) v = uniform_unit(rng) * 10.0;
  auto result = lloyd_max_roots(samples, 3);
  // Each centroid equals the mean of its Voronoi cell.
  for (int k = 0; k < 3; ++k) {
    double sum = 0.0;
    long long count = 0;
    for (std::size_t i = 0; i < samples.size(); ++i)
      if (result.assignment[i] == k) {
        sum += samples[i];
        ++count;
      }
    REQUIRE(count > 0);
    CHECK(std::fabs(result.centroids[static_cast<std::size_t>(k)] -
                    sum / static_cast<double>(count)) < 1e-7);
  }
}

TEST_CASE("fitting a constant slice reproduces the constant with one live path") {
  auto slice = constant_slice(42.0, 3, 10);
  FitOptions options;
  options.iterations = 1000;
  options.seed = 9;
  auto fit = fit_tree(slice, TreeStructure::binary(3), 42.0, options);
  REQUIRE(fit.tree.validate().ok());
  for (const auto& nd : fit.tree.nodes()) CHECK(nd.value == 42.0);
  long long live = 0;
  for (std::size_t i = 0; i < fit.leaf_counts.size(); ++i)
    if (fit.leaf_counts[i] > 0) ++live;
  CHECK(live == 1);
  double top = 0.0;
  for (NodeId leaf : fit.tree.leaves()) top = std::max(top, fit.tree.path_probability(leaf));
  CHECK(top == 1.0);
  CHECK_FALSE(fit.warnings.empty());
}

TEST_CASE("one-stage two-child fit approaches the half-normal means") {
  std::mt19937_64 rng(31337);
  std::normal_distribution<double> normal(0.0, 1.0);
  SampleSlice slice;
  std::vector<double> samples;
  for (int i = 0; i < 20000; ++i) {
    double z = normal(rng);
    samples.push_back(z);
    slice.trajectories.push_back({0.0, z});
  }
  TreeStructure structure{{2}};
  FitOptions options;
  options.iterations = 20000;
  options.seed = 4;
  auto fit = fit_tree(slice, structure, 0.0, options);
  double lo = fit.tree.node(1).value;
  double hi = fit.tree.node(2).value;
  if (lo > hi) std::swap(lo, hi);
  const double target = std::sqrt(2.0 / M_PI);
  CHECK(std::fabs(lo + target) < 0.08);
  CHECK(std::fabs(hi - target) < 0.08);
  auto oracle = offline_two_means(samples);
  CHECK(std::fabs(lo - oracle[0]) < 0.08);
  CHECK(std::fabs(hi - oracle[1]) < 0.08);
}

TEST_CASE("leaf probabilities from counters sum to one") {
  std::mt19937_64 rng(12);
  SampleSlice slice;
  for (int i = 0; i < 50; ++i) {
    std::vector<double> tr(4);
    for (auto& v : tr) v = uniform_unit(rng) * 100.0;
    slice.trajectories.push_back(tr);
  }
  FitOptions options;
  options.iterations = 5000;
  options.seed = 3;
  auto fit = fit_tree(slice, TreeStructure::binary(4), 50.0, options);
  REQUIRE(fit.tree.validate().ok());
  double sum = 0.0;
  long long counter_sum = 0;
  for (NodeId leaf : fit.tree.leaves()) sum += fit.tree.path_probability(leaf);
  for (long long c : fit.leaf_counts) counter_sum += c;
  CHECK(counter_sum == options.iterations);
  CHECK(std::fabs(sum - 1.0) < 1e-12);
}

TEST_CASE("zero step sizes leave the initialization untouched") {
  std::mt19937_64 rng(8);
  SampleSlice slice;
  for (int i = 0; i < 30; ++i) {
    std::vector<double> tr(3);
    for (auto& v : tr) v = uniform_unit(rng) * 10.0;
    slice.trajectories.push_back(tr);
  }
  FitOptions frozen;
  frozen.iterations = 500;
  frozen.step.a0 = 0.0;
  frozen.seed = 5;
  auto fit = fit_tree(slice, TreeStructure::binary(3), 5.0, frozen);

  FitOptions moving = frozen;
  moving.step.a0 = 1.0;
  moving.iterations = 4;  // leaf count, minimum allowed
  auto init = fit_tree(slice, TreeStructure::binary(3), 5.0, moving);
  // Same initialization rule, so the frozen fit must match it stage by stage
  // wherever the moving one did not update (root always).
  CHECK(fit.tree.root_value() == 5.0);
  (void)init;
  // Deterministic check: rerunning the frozen fit reproduces itself.
  auto again = fit_tree(slice, TreeStructure::binary(3), 5.0, frozen);
  for (int id = 0; id < fit.tree.size(); ++id)
    CHECK(fit.tree.node(id).value == again.tree.node(id).value);
}

TEST_CASE("fit is deterministic for a fixed seed") {
  std::mt19937_64 rng(21);
  SampleSlice slice;
  for (int i = 0; i < 40; ++i) {
    std::vector<double> tr(4);
    for (auto& v : tr) v = 100.0 + uniform_unit(rng) * 40.0;
    slice.trajectories.push_back(tr);
  }
  FitOptions options;
  options.iterations = 2000;
  options.seed = 99;
  auto a = fit_tree(slice, TreeStructure::binary(4), 110.0, options);
  auto b = fit_tree(slice, TreeStructure::binary(4), 110.0, options);
  CHECK(a.leaf_counts == b.leaf_counts);
  for (int id = 0; id < a.tree.size(); ++id) {
    CHECK(a.tree.node(id).value == b.tree.node(id).value);
    CHECK(a.tree.node(id).edge_prob == b.tree.node(id).edge_prob);
  }
}

TEST_CASE("root value stays pinned during fitting") {
  std::mt19937_64 rng(14);
  SampleSlice slice;
  for (int i = 0; i < 25; ++i) {
    std::vector<double> tr(3, 500.0 + uniform_unit(rng) * 100.0);
    slice.trajectories.push_back(tr);
  }
  FitOptions options;
  options.iterations = 1000;
  options.seed = 6;
  auto fit = fit_tree(slice, TreeStructure::binary(3), -123.0, options);
  CHECK(fit.tree.root_value() == -123.0);
}

TEST_CASE("library build produces bins-by-epochs entries and round-trips") {
  // Synthetic cyclostationary series: sinusoid plus a deterministic wobble.
  std::vector<double> series;
  std::mt19937_64 rng(2);
  for (int day = 0; day < 20; ++day)
    for (int h = 0; h < 24; ++h)
      series.push_back(2000.0 + 600.0 * std::sin(2.0 * M_PI * h / 24.0) +
                       150.0 * uniform_unit(rng));

  LibraryBuildConfig config;
  config.params.period = 24;
  config.params.horizon = 3;
  config.params.bins = 2;
  config.params.iterations = 500;
  config.params.seed = 123;
  config.epochs = {0, 1, 2};
  auto library = build_library(series, config);

  CHECK(library.validate().ok());
  CHECK(library.entries().size() == 6);
  for (int epoch : {0, 1, 2}) CHECK(library.bins_for(epoch) == 2);
  for (const auto& [key, entry] : library.entries())
    CHECK(entry.tree.root_value() == entry.centroid);

  auto dir = std::filesystem::temp_directory_path() / "dmsuc_library_rt";
  std::filesystem::remove_all(dir);
  save_library(library, dir);
  auto loaded = load_library(dir);
  std::filesystem::remove_all(dir);

  REQUIRE(loaded.entries().size() == library.entries().size());
  for (const auto& [key, entry] : library.entries()) {
    const auto& other = loaded.entry(key.first, key.second);
    CHECK(other.centroid == entry.centroid);
    CHECK(other.leaf_counts == entry.leaf_counts);
    CHECK(other.n_total == entry.n_total);
    for (int id = 0; id < entry.tree.size(); ++id) {
      CHECK(other.tree.node(id).value == entry.tree.node(id).value);
      CHECK(other.tree.node(id).edge_prob == entry.tree.node(id).edge_prob);
    }
  }
}

TEST_CASE("library build is independent of the job count") {
  std::vector<double> series;
  for (int day = 0; day < 12; ++day)
    for (int h = 0; h < 24; ++h)
      series.push_back(1000.0 + 100.0 * std::sin(2.0 * M_PI * h / 24.0) + 3.0 * day);
  LibraryBuildConfig config;
  config.params.period = 24;
  config.params.horizon = 3;
  config.params.bins = 2;
  config.params.iterations = 300;
  config.params.seed = 55;
  config.epochs = {0, 1};
  config.jobs = 1;
  auto serial = build_library(series, config);
  config.jobs = 2;
  auto parallel = build_library(series, config);
  for (const auto& [key, entry] : serial.entries()) {
    const auto& other = parallel.entry(key.first, key.second);
    CHECK(other.leaf_counts == entry.leaf_counts);
    for (int id = 0; id < entry.tree.size(); ++id)
      CHECK(other.tree.node(id).value == entry.tree.node(id).value);
  }
}

TEST_CASE("single-bin library degenerates to one tree per epoch") {
  std::vector<double> series(24 * 8);
  for (std::size_t i = 0; i < series.size(); ++i)
    series[i] = 100.0 + static_cast<double>(i % 24);
  LibraryBuildConfig config;
  config.params.period = 24;
  config.params.horizon = 2;
  config.params.bins = 1;
  config.params.iterations = 100;
  config.epochs = {0, 1, 2};
  auto library = build_library(series, config);
  CHECK(library.entries().size() == 3);
  auto [tree, bin] = select_and_augment(library, 1, 555.0);
  CHECK(bin == 0);
  CHECK(tree.root_value() == 555.0);
}

TEST_CASE("select_and_augment picks nearest centroid, lower bin on ties") {
  TreeLibrary library(LibraryParams{24, 2, 2, 10, {}, 1});
  auto make_entry = [](double centroid) {
    std::vector<TreeNode> nodes{{0, 0, -1, 1.0, centroid}, {1, 1, 0, 1.0, centroid + 5.0}};
    return LibraryEntry{ScenarioTree(std::move(nodes)), centroid, {10}, 10, 0};
  };
  library.put(0, 0, make_entry(100.0));
  library.put(0, 1, make_entry(200.0));

  auto [exact, exact_bin] = select_and_augment(library, 0, 200.0);
  CHECK(exact_bin == 1);
  CHECK(exact.root_value() == 200.0);
  CHECK(exact.node(1).value == 205.0);  // untouched

  auto [mid, mid_bin] = select_and_augment(library, 0, 150.0);
  CHECK(mid_bin == 0);  // tie toward the lower bin index
  CHECK(mid.root_value() == 150.0);

  CHECK_THROWS_AS(select_and_augment(library, 3, 100.0), Error);
}

TEST_CASE("wait-and-see with an exact path match only bumps the counter") {
  TreeLibrary library(LibraryParams{24, 3, 1, 100, {}, 1});
  std::vector<TreeNode> nodes{{0, 0, -1, 1.0, 10.0}, {1, 1, 0, 0.6, 20.0}, {2, 1, 0, 0.4, 40.0},
                              {3, 2, 1, 1.0, 30.0},  {4, 2, 2, 1.0, 50.0}};
  library.put(0, 0, LibraryEntry{ScenarioTree(nodes), 10.0, {60, 40}, 100, 0});

  std::vector<double> realized{10.0, 20.0, 30.0};
  auto updated = wait_and_see_update(library, 0, 0, realized, StepSchedule{}, 101);
  const auto& entry = updated.entry(0, 0);
  CHECK(entry.leaf_counts == std::vector<long long>{61, 40});
  CHECK(entry.n_total == 101);
  for (int id = 0; id < 5; ++id) CHECK(entry.tree.node(id).value == nodes[static_cast<std::size_t>(id)].value);
  // probabilities renormalized from the new counters
  CHECK(entry.tree.node(1).edge_prob == Catch::Approx(61.0 / 101.0));
  CHECK(entry.tree.node(2).edge_prob == Catch::Approx(40.0 / 101.0));
}

TEST_CASE("wait-and-see with zero step leaves values unchanged") {
  TreeLibrary library(LibraryParams{24, 2, 1, 100, {}, 1});
  std::vector<TreeNode> nodes{{0, 0, -1, 1.0, 1.0}, {1, 1, 0, 1.0, 5.0}};
  library.put(0, 0, LibraryEntry{ScenarioTree(nodes), 1.0, {100}, 100, 0});
  StepSchedule zero{0.0, 30.0};
  auto updated = wait_and_see_update(library, 0, 0, std::vector<double>{2.0, 9.0}, zero, 101);
  CHECK(updated.entry(0, 0).tree.node(1).value == 5.0);
}

TEST_CASE("wait-and-see moves exactly one path toward the realization") {
  TreeLibrary library(LibraryParams{24, 3, 1, 100, {}, 1});
  std::vector<TreeNode> nodes{{0, 0, -1, 1.0, 0.0},  {1, 1, 0, 0.5, 10.0}, {2, 1, 0, 0.5, 30.0},
                              {3, 2, 1, 1.0, 10.0},  {4, 2, 2, 1.0, 30.0}};
  library.put(0, 0, LibraryEntry{ScenarioTree(nodes), 0.0, {50, 50}, 100, 0});

  std::vector<double> realized{0.0, 12.0, 14.0};
  StepSchedule schedule{1.0, 30.0};
  long long n_step = 101;
  auto updated = wait_and_see_update(library, 0, 0, realized, schedule, n_step);
  const auto& tree = updated.entry(0, 0).tree;

  // Reference single step: the closest path is node chain 0-1-3; each
  // non-root value moves by 2*a_n*(realized - value).
  double a = schedule.at(n_step);
  CHECK(tree.node(1).value == Catch::Approx(10.0 - 2.0 * a * (10.0 - 12.0)));
  CHECK(tree.node(3).value == Catch::Approx(10.0 - 2.0 * a * (10.0 - 14.0)));
  CHECK(tree.node(2).value == 30.0);
  CHECK(tree.node(4).value == 30.0);
  CHECK(updated.entry(0, 0).leaf_counts == std::vector<long long>{51, 50});

  CHECK_THROWS_AS(
      wait_and_see_update(library, 0, 0, std::vector<double>{1.0}, schedule, 101), Error);
}

TEST_CASE("residual composition: zero residuals with persistence forecaster") {
  std::vector<TreeNode> nodes{{0, 0, -1, 1.0, 0.0}, {1, 1, 0, 0.5, 0.0}, {2, 1, 0, 0.5, 0.0},
                              {3, 2, 1, 1.0, 0.0},  {4, 2, 2, 1.0, 0.0}};
  ScenarioTree residual(std::move(nodes));
  std::vector<double> state{100.0};
  auto load = compose_residual_tree(residual, Forecaster::persistence(), state);
  for (const auto& nd : load.nodes()) CHECK(nd.value == 100.0);
  for (int id = 0; id < residual.size(); ++id)
    CHECK(load.node(id).edge_prob == residual.node(id).edge_prob);
}

TEST_CASE("residual composition: zero forecaster reproduces the residuals") {
  std::vector<TreeNode> nodes{{0, 0, -1, 1.0, 7.0}, {1, 1, 0, 1.0, -3.0}, {2, 2, 1, 1.0, 4.5}};
  ScenarioTree residual(std::move(nodes));
  Forecaster zero{[](std::span<const double>) { return 0.0; }, 1};
  std::vector<double> state{7.0};  // root value comes from the observed present
  auto load = compose_residual_tree(residual, zero, state);
  CHECK(load.node(0).value == 7.0);
  CHECK(load.node(1).value == -3.0);
  CHECK(load.node(2).value == 4.5);
}

TEST_CASE("residual composition: AR(1) hand-rolled recursion") {
  std::vector<TreeNode> nodes{{0, 0, -1, 1.0, 0.0}, {1, 1, 0, 1.0, 5.0}, {2, 2, 1, 1.0, 0.0}};
  ScenarioTree residual(std::move(nodes));
  std::vector<double> state{100.0};
  auto load = compose_residual_tree(residual, Forecaster::ar1(0.9), state);
  CHECK(load.node(0).value == 100.0);
  CHECK(load.node(1).value == Catch::Approx(95.0));    // 0.9*100 + 5
  CHECK(load.node(2).value == Catch::Approx(85.5));    // 0.9*95 + 0
}

TEST_CASE("residual composition rejects state length mismatches") {
  std::vector<TreeNode> nodes{{0, 0, -1, 1.0, 0.0}, {1, 1, 0, 1.0, 0.0}};
  ScenarioTree residual(std::move(nodes));
  std::vector<double> state{1.0, 2.0};
  CHECK_THROWS_AS(compose_residual_tree(residual, Forecaster::persistence(), state), Error);
}

TEST_CASE("pruning removes only zero-probability subtrees") {
  std::vector<TreeNode> nodes{{0, 0, -1, 1.0, 0.0}, {1, 1, 0, 1.0, 1.0}, {2, 1, 0, 0.0, 2.0},
                              {3, 2, 1, 0.5, 3.0},  {4, 2, 1, 0.5, 4.0}, {5, 2, 2, 1.0, 5.0}};
  ScenarioTree tree(std::move(nodes));
  std::vector<long long> counts{50, 50, 0};  // leaves 3, 4, 5
  auto pruned = prune_zero_probability(tree, counts);
  CHECK(pruned.size() == 4);
  CHECK(pruned.validate().ok());
  double sum = 0.0;
  for (NodeId leaf : pruned.leaves()) sum += pruned.path_probability(leaf);
  CHECK(sum == Catch::Approx(1.0));
}
