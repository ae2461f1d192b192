// Randomized invariants over hand-rolled generators: random offspring laws,
// seeds and test points, each case reproducible from its printed seed.

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gwspine/auxiliary.hpp"
#include "gwspine/parallel.hpp"
#include "gwspine/stats.hpp"
#include "test_support.hpp"

namespace gwspine {
namespace {

constexpr int kCases = 60;

TEST(Property, OffspringLawsAreNormalized) {
  std::mt19937_64 gen(101);
  for (int c = 0; c < kCases; ++c) {
    const auto raw = testing::random_offspring(gen);
    const auto d = OffspringDistribution::validate(raw);
    double total = 0.0;
    double sb = 0.0;
    for (const auto& a : d.support()) {
      total += a.p;
      sb += a.k * a.p;
    }
    EXPECT_NEAR(total, 1.0, 1e-12) << "case " << c;
    EXPECT_NEAR(sb, d.mean(), 1e-12) << "case " << c;
    EXPECT_GE(d.variance(), -1e-12);
    EXPECT_NEAR(d.factorial_moment2(), d.second_moment() - d.mean(), 1e-12);
  }
}

TEST(Property, MomentsAtTimeZeroAndOrdering) {
  std::mt19937_64 gen(102);
  std::uniform_real_distribution<double> rate(0.2, 2.0);
  std::uniform_real_distribution<double> time(0.0, 3.0);
  for (int c = 0; c < kCases; ++c) {
    const auto d = OffspringDistribution::validate(testing::random_offspring(gen));
    const double r = rate(gen);
    const auto zero = expected_moments(d, r, 0.0);
    EXPECT_DOUBLE_EQ(zero.mean_alive, 1.0);
    EXPECT_DOUBLE_EQ(zero.second_moment_alive, 1.0);
    EXPECT_DOUBLE_EQ(zero.mean_deaths, 0.0);
    const auto m = expected_moments(d, r, time(gen));
    EXPECT_GE(m.second_moment_alive, m.mean_alive * m.mean_alive * (1 - 1e-12)) << "case " << c;
    EXPECT_GE(m.mean_deaths, 0.0);
  }
}

TEST(Property, TreesAreConsistent) {
  std::mt19937_64 gen(103);
  std::uniform_real_distribution<double> time(0.1, 2.5);
  for (int c = 0; c < kCases; ++c) {
    const auto d = OffspringDistribution::validate(testing::random_tame_offspring(gen));
    const double horizon = time(gen);
    Stream rng(gen());
    const GWTree tree = simulate_tree(d, 1.0, horizon, {}, rng);
    const auto nodes = tree.nodes();
    for (NodeIndex i = 0; i < nodes.size(); ++i) {
      const auto& n = nodes[i];
      ASSERT_GT(n.death, n.birth);
      if (i > 0) {
        ASSERT_EQ(n.birth, nodes[n.parent].death);
        ASSERT_EQ(n.generation, nodes[n.parent].generation + 1);
      }
      ASSERT_EQ(n.expanded(), n.death < horizon && n.nu > 0) << "case " << c << " node " << i;
    }
    std::size_t alive = 0;
    for (const auto& n : nodes) alive += (n.birth <= horizon && n.death > horizon) ? 1 : 0;
    EXPECT_EQ(alive, tree.count_alive(horizon));
  }
}

TEST(Property, PopulationSumsAgreeWithTree) {
  std::mt19937_64 gen(104);
  for (int c = 0; c < kCases; ++c) {
    BranchingModel model;
    model.offspring = OffspringDistribution::validate(testing::random_tame_offspring(gen));
    model.motion = MotionModel::brownian(0.0, 1.0);
    model.kernel = BranchingKernel::equal_split();
    model.initial = InitialLaw::at(State{1.0, 0});
    Stream rng(gen());
    const auto pop = simulate_population(model, 1.5, {}, RecordSpec::terminal_only(), rng);
    const auto s = sum_over_alive(pop, 1.5, [](const State&) { return 1.0; });
    EXPECT_EQ(s.count, pop.tree().count_alive(1.5));
    EXPECT_EQ(s.value, static_cast<double>(s.count));
  }
}

TEST(Property, StillEqualSplitConservesMass) {
  std::mt19937_64 gen(105);
  std::uniform_real_distribution<double> x0(0.1, 10.0);
  for (int c = 0; c < kCases; ++c) {
    auto raw = testing::random_tame_offspring(gen);
    raw.erase(0);
    if (raw.empty()) raw[2] = 1.0;
    BranchingModel model;
    model.offspring = OffspringDistribution::validate(raw);
    model.motion = MotionModel::still();
    model.kernel = BranchingKernel::equal_split();
    const double x = x0(gen);
    model.initial = InitialLaw::at(State{x, 0});
    Stream rng(gen());
    const auto pop = simulate_population(model, 1.0, {}, RecordSpec::terminal_only(), rng);
    EXPECT_NEAR(sum_over_alive(pop, 1.0, [](const State& s) { return s.x; }).value, x, 1e-12 * x) << "case " << c;
  }
}

TEST(Property, KernelsArePureInTheta) {
  std::mt19937_64 gen(106);
  std::uniform_real_distribution<double> x(-5.0, 5.0);
  const std::vector<BranchingKernel> kernels{BranchingKernel::uniform_fraction(), BranchingKernel::beta_fraction(2.0, 3.0),
                                             BranchingKernel::aging(AgingParameters{}), BranchingKernel::equal_split()};
  for (int c = 0; c < kCases; ++c) {
    const State s{x(gen), 0};
    const std::uint64_t theta = gen();
    for (const auto& k : kernels) EXPECT_EQ(k.positions(s, 2, theta), k.positions(s, 2, theta)) << k.name();
  }
}

TEST(Property, ZTestIsSymmetric) {
  std::mt19937_64 gen(107);
  std::uniform_real_distribution<double> v(-3.0, 3.0);
  std::uniform_real_distribution<double> se(0.0, 1.0);
  for (int c = 0; c < kCases; ++c) {
    const McEstimate a{v(gen), se(gen), 10};
    const McEstimate b{v(gen), se(gen), 10};
    EXPECT_EQ(two_sample_z(a, b).z, two_sample_z(b, a).z);
    EXPECT_GE(two_sample_z(a, b).z, 0.0);
    EXPECT_EQ(two_sample_z(a, a).z, 0.0);
  }
}

TEST(Property, KsDistanceIsBounded) {
  std::mt19937_64 gen(108);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_int_distribution<int> size(1, 200);
  for (int c = 0; c < kCases; ++c) {
    std::vector<double> sample(static_cast<std::size_t>(size(gen)));
    const double shift = z(gen);
    for (auto& s : sample) s = z(gen) + shift;
    const double d = ks_distance(sample, [](double x) { return normal_cdf(x); });
    EXPECT_GE(d, 0.0);
    EXPECT_LE(d, 1.0);
  }
}

TEST(Property, ReplicaResultsIgnoreJobCount) {
  std::mt19937_64 gen(109);
  for (int c = 0; c < 10; ++c) {
    const std::uint64_t seed = gen();
    auto draw = [seed](std::size_t i) {
      Stream rng(derive_key(seed, i));
      double acc = 0.0;
      for (int k = 0; k < 100; ++k) acc += rng.normal();
      return acc;
    };
    const auto one = run_replicas<double>(257, 1, draw);
    const auto four = run_replicas<double>(257, 4, draw);
    EXPECT_EQ(one, four);
    EXPECT_EQ(pairwise_sum(one), pairwise_sum(four));
  }
}

TEST(Property, SemigroupOfOneIsOne) {
  std::mt19937_64 gen(110);
  for (int c = 0; c < 20; ++c) {
    BranchingModel model;
    model.offspring = OffspringDistribution::validate(testing::random_tame_offspring(gen));
    if (model.offspring.mean() == 0.0) continue;
    model.motion = MotionModel::ornstein_uhlenbeck(1.0, 0.0, 1.0);
    model.kernel = BranchingKernel::local();
    const auto est = estimate_semigroup(model, [](const State&) { return 1.0; }, 1.0, State{}, 50, gen());
    EXPECT_EQ(est.mean, 1.0);
  }
}

}  // namespace
}  // namespace gwspine
