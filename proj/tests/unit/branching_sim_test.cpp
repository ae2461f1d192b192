#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <sstream>

#include "gwspine/branching_sim.hpp"
#include "test_support.hpp"

namespace gwspine {
namespace {

BranchingModel make_model(std::map<int, double> p, MotionModel motion, BranchingKernel kernel, double x0) {
  BranchingModel m;
  m.name = "test";
  m.rate = 1.0;
  m.offspring = OffspringDistribution::validate(p);
  m.motion = std::move(motion);
  m.kernel = std::move(kernel);
  m.initial = InitialLaw::at(State{x0, 0});
  return m;
}

const auto one = [](const State&) { return 1.0; };
const auto ident = [](const State& s) { return s.x; };

TEST(BranchingSim, ImmediateExtinction) {
  const auto model = make_model({{0, 1.0}}, MotionModel::brownian(0.0, 1.0), BranchingKernel::local(), 0.0);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Stream rng(seed);
    const auto pop = simulate_population(model, 5.0, {}, RecordSpec::terminal_only(), rng);
    const auto& tree = pop.tree();
    ASSERT_EQ(tree.size(), 1u);
    if (tree.node(0).death < 5.0) {
      EXPECT_EQ(sum_over_alive(pop, 5.0, one).count, 0u);
      EXPECT_EQ(sum_over_dead(pop, 5.0, one).count, 1u);
    }
  }
}

TEST(BranchingSim, EqualSplitHalvesPerGeneration) {
  const auto model = make_model({{2, 1.0}}, MotionModel::still(), BranchingKernel::equal_split(), 8.0);
  Stream rng(1);
  const auto pop = simulate_population(model, 3.0, {}, RecordSpec::terminal_only(), rng);
  const auto s = pop.snapshot(3.0);
  double mass = 0.0;
  for (std::size_t k = 0; k < s.nodes.size(); ++k) {
    const auto g = pop.tree().node(s.nodes[k]).generation;
    EXPECT_DOUBLE_EQ(s.states[k].x, 8.0 / std::ldexp(1.0, static_cast<int>(g)));
    mass += s.states[k].x;
  }
  EXPECT_NEAR(mass, 8.0, 1e-12);
}

TEST(BranchingSim, UniformFractionConservesMass) {
  const auto model = make_model({{2, 1.0}}, MotionModel::still(), BranchingKernel::uniform_fraction(), 1.0);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Stream rng(seed);
    const auto pop = simulate_population(model, 3.0, {}, RecordSpec::terminal_only(), rng);
    EXPECT_NEAR(sum_over_alive(pop, 3.0, ident).value, 1.0, 1e-12);
  }
}

TEST(BranchingSim, CountingSums) {
  const auto model = make_model({{0, 0.2}, {2, 0.5}, {3, 0.3}}, MotionModel::brownian(0.0, 1.0),
                                BranchingKernel::local(), 0.0);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Stream rng(seed);
    const auto pop = simulate_population(model, 2.0, {}, RecordSpec::terminal_only(), rng);
    const auto alive = sum_over_alive(pop, 2.0, one);
    const auto n = static_cast<double>(alive.count);
    EXPECT_EQ(alive.value, n);
    EXPECT_EQ(alive.count, pop.tree().count_alive(2.0));
    const auto dead = sum_over_dead(pop, 2.0, one);
    EXPECT_EQ(dead.count, pop.tree().deaths_before(2.0));
    EXPECT_EQ(dead.value, static_cast<double>(dead.count));
    EXPECT_EQ(sum_over_forks(pop, 2.0, one, one).value, n * (n - 1.0));
  }
}

TEST(BranchingSim, WindowOfOnesCountsAlive) {
  const auto model = make_model({{2, 1.0}}, MotionModel::brownian(0.0, 1.0), BranchingKernel::local(), 0.0);
  Stream rng(3);
  const auto pop = simulate_population(model, 2.0, {}, RecordSpec::paths(0.05), rng);
  const auto w = ancestral_window_functional(pop, 2.0, 0.5, [](const LineageWindow&) { return 1.0; });
  EXPECT_EQ(w.value, static_cast<double>(pop.tree().count_alive(2.0)));
}

TEST(BranchingSim, WindowNeedsPaths) {
  const auto model = make_model({{2, 1.0}}, MotionModel::brownian(0.0, 1.0), BranchingKernel::local(), 0.0);
  Stream rng(3);
  const auto pop = simulate_population(model, 1.0, {}, RecordSpec::terminal_only(), rng);
  try {
    ancestral_window_functional(pop, 1.0, 0.5, [](const LineageWindow&) { return 1.0; });
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::PathsNotRecorded);
  }
}

TEST(BranchingSim, ChildBornAtParentEndState) {
  const auto model = make_model({{2, 1.0}}, MotionModel::brownian(0.1, 1.0), BranchingKernel::local(), 0.0);
  Stream rng(4);
  const auto pop = simulate_population(model, 2.0, {}, RecordSpec::terminal_only(), rng);
  const auto nodes = pop.tree().nodes();
  for (NodeIndex i = 1; i < nodes.size(); ++i) EXPECT_EQ(pop.birth_state(i), pop.end_state(nodes[i].parent));
}

TEST(BranchingSim, SubtreeRegrowsFromItsKey) {
  const auto model = make_model({{0, 0.1}, {2, 0.9}}, MotionModel::ornstein_uhlenbeck(1.0, 0.0, 1.0),
                                BranchingKernel::uniform_fraction(), 1.0);
  Stream rng(5);
  const double horizon = 2.5;
  const auto pop = simulate_population(model, horizon, {}, RecordSpec::terminal_only(), rng);
  const auto nodes = pop.tree().nodes();
  ASSERT_GT(nodes.size(), 3u);
  const NodeIndex u = 2;
  const auto sub = simulate_population_from(model, horizon, {}, RecordSpec::terminal_only(), nodes[u].key,
                                            pop.birth_state(u), nodes[u].birth);
  EXPECT_EQ(sub.end_state(0), pop.end_state(u));
  EXPECT_EQ(sub.tree().node(0).death, nodes[u].death);
  const NodeLabel lu = pop.tree().label(u);
  std::vector<State> original;
  const auto s = pop.snapshot(horizon);
  for (std::size_t k = 0; k < s.nodes.size(); ++k) {
    if (lu.is_ancestor_or_self(pop.tree().label(s.nodes[k]))) original.push_back(s.states[k]);
  }
  const auto regrown = sub.snapshot(horizon).states;
  ASSERT_EQ(regrown.size(), original.size());
  for (std::size_t k = 0; k < original.size(); ++k) EXPECT_EQ(regrown[k], original[k]);
}

TEST(BranchingSim, RecordingDoesNotChangeTerminalStates) {
  const auto model = make_model({{2, 1.0}}, MotionModel::brownian(0.0, 1.0), BranchingKernel::uniform_fraction(), 1.0);
  Stream a(6);
  Stream b(6);
  const auto plain = simulate_population(model, 2.0, {}, RecordSpec::terminal_only(), a);
  const auto traced = simulate_population(model, 2.0, {}, RecordSpec::paths(0.01), b);
  ASSERT_EQ(plain.tree().size(), traced.tree().size());
  for (NodeIndex i = 0; i < plain.tree().size(); ++i) EXPECT_EQ(plain.end_state(i), traced.end_state(i));
}

TEST(BranchingSim, ObservationTimesAreRecorded) {
  const auto model = make_model({{2, 1.0}}, MotionModel::brownian(0.0, 1.0), BranchingKernel::local(), 0.0);
  Stream rng(7);
  const auto pop = simulate_population(model, 2.0, {}, RecordSpec::at({0.5, 1.0}), rng);
  EXPECT_EQ(pop.snapshot(1.0).nodes.size(), pop.tree().count_alive(1.0));
  try {
    pop.snapshot(0.75);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::StateNotRecorded);
  }
  EXPECT_THROW(pop.snapshot(3.0), Error);
}

TEST(BranchingSim, WProxyAndEstimate) {
  const auto model = make_model({{2, 1.0}}, MotionModel::still(), BranchingKernel::local(), 0.0);
  EXPECT_DOUBLE_EQ(w_proxy(model, 10, std::log(2.0)), 5.0);
  const auto fast = estimate_W(model, 3.0, 20000, 11);
  EXPECT_TRUE(fast.fast_path);
  EXPECT_LT(testing::z_score(fast.summary.mean, fast.summary.se, 1.0), 4.0);
  const auto built = estimate_W(model, 2.0, 4000, 12, 1, true);
  EXPECT_FALSE(built.fast_path);
  EXPECT_LT(testing::z_score(built.summary.mean, built.summary.se, 1.0), 4.0);
  const auto sub = make_model({{0, 0.5}, {2, 0.5}}, MotionModel::still(), BranchingKernel::local(), 0.0);
  try {
    estimate_W(sub, 1.0, 10, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Subcritical);
  }
}

TEST(BranchingSim, SnapshotCsv) {
  const auto model = make_model({{2, 1.0}}, MotionModel::still(), BranchingKernel::local(), 1.5);
  Stream rng(8);
  const auto pop = simulate_population(model, 0.5, {}, RecordSpec::terminal_only(), rng);
  std::ostringstream os;
  write_snapshot_csv(os, 3, pop);
  std::istringstream in(os.str());
  std::string line;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    EXPECT_EQ(line.rfind("3,", 0), 0u) << line;
    ++rows;
  }
  EXPECT_EQ(rows, pop.tree().count_alive(0.5));
  EXPECT_STREQ(kSnapshotCsvHeader, "replica,label,t,state,type");
}

TEST(BranchingSim, CapIsEnforced) {
  const auto model = make_model({{3, 1.0}}, MotionModel::still(), BranchingKernel::local(), 0.0);
  Stream rng(9);
  TreeCaps caps;
  caps.max_nodes = 100;
  try {
    simulate_population(model, 20.0, caps, RecordSpec::terminal_only(), rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::PopulationCapExceeded);
  }
}

}  // namespace
}  // namespace gwspine
