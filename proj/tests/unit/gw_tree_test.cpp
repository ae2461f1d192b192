#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <sstream>
#include <vector>

#include "gwspine/gw_tree.hpp"
#include "test_support.hpp"

namespace gwspine {
namespace {

NodeLabel L(std::string_view s) { return NodeLabel::parse(s); }

TEST(NodeLabel, ParseAndPrint) {
  EXPECT_TRUE(L("root").is_root());
  EXPECT_EQ(L("1.2.1").to_string(), "1.2.1");
  EXPECT_EQ(L("1.2.1").generation(), 3u);
  EXPECT_EQ(L("1.2").child(3), L("1.2.3"));
  EXPECT_EQ(L("1.2").parent(), L("1"));
  EXPECT_THROW(L("1..2"), Error);
  EXPECT_THROW(L("0"), Error);
  EXPECT_TRUE(L("1").is_ancestor_or_self(L("1.2")));
  EXPECT_FALSE(L("1.2").is_ancestor_or_self(L("1")));
}

TEST(NodeLabel, MostRecentCommonAncestor) {
  EXPECT_EQ(mrca(L("1.2.1"), L("1.3")), L("1"));
  EXPECT_EQ(mrca(L("1.2"), L("1.2")), L("1.2"));
  EXPECT_EQ(mrca(L("1.4.4"), L("2.1")), NodeLabel::root());
}

TEST(SimulateTree, ZeroOffspringIsSingleNode) {
  const auto d = OffspringDistribution::validate(std::map<int, double>{{0, 1.0}});
  Stream rng(1);
  const GWTree tree = simulate_tree(d, 3.0, 5.0, {}, rng);
  ASSERT_EQ(tree.size(), 1u);
  EXPECT_EQ(tree.node(0).nu, 0u);
  EXPECT_EQ(tree.count_alive(5.0), 0u);
  EXPECT_EQ(tree.deaths_before(5.0), 1u);
}

TEST(SimulateTree, ChildBirthEqualsParentDeathBitForBit) {
  Stream rng(2);
  const GWTree tree = simulate_tree(OffspringDistribution::yule(), 1.0, 4.0, {}, rng);
  const auto nodes = tree.nodes();
  for (NodeIndex i = 1; i < nodes.size(); ++i) {
    ASSERT_EQ(nodes[i].birth, nodes[nodes[i].parent].death);
    ASSERT_EQ(nodes[i].generation, nodes[nodes[i].parent].generation + 1);
  }
}

TEST(SimulateTree, AliveSetAtSpecialTimes) {
  Stream rng(3);
  const GWTree tree = simulate_tree(OffspringDistribution::yule(), 1.0, 3.0, {}, rng);
  EXPECT_EQ(tree.alive_at(0.0), std::vector<NodeLabel>{NodeLabel::root()});
  const double first_death = tree.node(0).death;
  EXPECT_EQ(tree.alive_at(std::nextafter(first_death, 0.0)), std::vector<NodeLabel>{NodeLabel::root()});
  EXPECT_EQ(tree.deaths_before(0.0), 0u);
  EXPECT_THROW(tree.alive_at(3.5), Error);
}

TEST(SimulateTree, AncestorAt) {
  Stream rng(4);
  const GWTree tree = simulate_tree(OffspringDistribution::yule(), 1.0, 3.0, {}, rng);
  const auto idx = tree.find(L("1.2"));
  if (!idx) GTEST_SKIP() << "node 1.2 not born before the horizon";
  const TreeNode& one = tree.node(*tree.find(L("1")));
  EXPECT_EQ(tree.ancestor_at(L("1.2"), one.birth), L("1"));
  EXPECT_EQ(tree.ancestor_at(L("1.2"), tree.node(0).death * 0.5), NodeLabel::root());
  const TreeNode& u = tree.node(*idx);
  EXPECT_EQ(tree.ancestor_at(L("1.2"), u.birth), L("1.2"));
}

TEST(SimulateTree, SameKeySameDump) {
  const auto d = OffspringDistribution::validate(std::map<int, double>{{0, 0.2}, {2, 0.5}, {3, 0.3}});
  std::ostringstream a, b;
  simulate_tree_from_key(d, 1.3, 3.0, {}, 77).dump(a);
  simulate_tree_from_key(d, 1.3, 3.0, {}, 77).dump(b);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_FALSE(a.str().empty());
}

TEST(SimulateTree, CapCarriesPartialTree) {
  TreeCaps caps;
  caps.max_nodes = 50;
  try {
    (void)simulate_tree_from_key(OffspringDistribution::yule(), 1.0, 20.0, caps, 5);
    FAIL();
  } catch (const PopulationCapExceeded& e) {
    EXPECT_EQ(e.code(), ErrorCode::PopulationCapExceeded);
    EXPECT_LE(e.partial().size(), 50u);
  }
}

// N_t and D_t from the tree against an independent count-only simulation and
// the hand-evaluated moment formulas.
struct MomentCase {
  std::map<int, double> p;
  double r;
  double t;
};

class TreeMomentsAgainstOracle : public ::testing::TestWithParam<MomentCase> {};

TEST_P(TreeMomentsAgainstOracle, MeansMatch) {
  const auto& c = GetParam();
  const auto d = OffspringDistribution::validate(c.p);
  const auto oracle = testing::moments_of(c.p, c.r);
  const int n = 20000;
  std::vector<double> alive, alive2, deaths, g_alive, g_deaths;
  std::mt19937_64 gen(1234);
  for (int i = 0; i < n; ++i) {
    const GWTree tree = simulate_tree_from_key(d, c.r, c.t, {}, derive_key(99, static_cast<std::uint64_t>(i)));
    const double a = static_cast<double>(tree.count_alive(c.t));
    alive.push_back(a);
    alive2.push_back(a * a);
    deaths.push_back(static_cast<double>(tree.deaths_before(c.t)));
    const auto [gn, gd] = testing::gillespie_counts(c.p, c.r, c.t, gen);
    g_alive.push_back(static_cast<double>(gn));
    g_deaths.push_back(static_cast<double>(gd));
  }
  const auto [ma, sa] = testing::mean_se(alive);
  const auto [ma2, sa2] = testing::mean_se(alive2);
  const auto [md, sd] = testing::mean_se(deaths);
  const auto [ga, gsa] = testing::mean_se(g_alive);
  const auto [gd, gsd] = testing::mean_se(g_deaths);
  EXPECT_LT(testing::z_score(ma, sa, oracle.mean_alive(c.t)), 4.0);
  EXPECT_LT(testing::z_score(ma2, sa2, oracle.second_alive(c.t)), 4.0);
  EXPECT_LT(testing::z_score(md, sd, oracle.mean_deaths(c.t)), 4.0);
  EXPECT_LT(std::abs(ma - ga) / std::hypot(sa, gsa), 4.0);
  EXPECT_LT(std::abs(md - gd) / std::hypot(sd, gsd), 4.0);
}

INSTANTIATE_TEST_SUITE_P(Laws, TreeMomentsAgainstOracle,
                         ::testing::Values(MomentCase{{{2, 1.0}}, 1.0, 1.0},
                                           MomentCase{{{0, 0.25}, {2, 0.75}}, 1.0, 1.0},
                                           MomentCase{{{0, 0.5}, {2, 0.5}}, 1.0, 2.0},
                                           MomentCase{{{0, 0.75}, {2, 0.25}}, 2.0, 1.5}));

TEST(ExpectedMoments, YuleClosedForm) {
  const TreeMoments m = expected_moments(OffspringDistribution::yule(), 1.0, 1.0);
  const double e = std::exp(1.0);
  EXPECT_NEAR(m.mean_alive, e, 1e-12);
  EXPECT_NEAR(m.second_moment_alive, 2 * e * e - e, 1e-12);
  EXPECT_NEAR(m.mean_deaths, e - 1.0, 1e-12);
}

TEST(ExpectedMoments, CriticalCase) {
  const auto d = OffspringDistribution::validate(std::map<int, double>{{0, 0.5}, {2, 0.5}});
  const TreeMoments m = expected_moments(d, 1.0, 2.0);
  EXPECT_DOUBLE_EQ(m.mean_alive, 1.0);
  EXPECT_NEAR(m.second_moment_alive, 1.0 + 1.0 * 2.0, 1e-12);
  EXPECT_NEAR(m.mean_deaths, 2.0, 1e-12);
}

TEST(ExpectedMoments, DeathsForSupportZeroTwo) {
  const auto d = OffspringDistribution::validate(std::map<int, double>{{0, 0.25}, {2, 0.75}});
  EXPECT_NEAR(expected_moments(d, 1.0, 1.0).mean_deaths, 2.0 * (std::exp(0.5) - 1.0), 1e-12);
  EXPECT_NEAR(expected_moments(d, 1.0, 1.0).mean_deaths, 1.29744, 1e-5);
}

TEST(ExpectedMoments, TimeZero) {
  const TreeMoments m = expected_moments(OffspringDistribution::yule(), 3.0, 0.0);
  EXPECT_DOUBLE_EQ(m.mean_alive, 1.0);
  EXPECT_DOUBLE_EQ(m.second_moment_alive, 1.0);
  EXPECT_DOUBLE_EQ(m.mean_deaths, 0.0);
}

TEST(YuleFastPath, GeometricMean) {
  Stream rng(8);
  std::vector<double> v;
  for (int i = 0; i < 50000; ++i) v.push_back(static_cast<double>(sample_yule_population(1.0, 2.0, rng)));
  const auto [m, se] = testing::mean_se(v);
  EXPECT_LT(testing::z_score(m, se, std::exp(2.0)), 4.0);
  EXPECT_GE(*std::min_element(v.begin(), v.end()), 1.0);
}

}  // namespace
}  // namespace gwspine
