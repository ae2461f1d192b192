#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "gwspine/error.hpp"
#include "gwspine/motion.hpp"
#include "test_support.hpp"

namespace gwspine {
namespace {

TEST(Motion, DeterministicDrift) {
  const MotionModel m = MotionModel::deterministic(1.0);
  Stream rng(1);
  EXPECT_DOUBLE_EQ(m.evolve(State{0.0, 0}, 2.0, rng).x, 2.0);
}

TEST(Motion, StillKeepsState) {
  const MotionModel m = MotionModel::still();
  Stream rng(1);
  EXPECT_TRUE(m.is_still());
  EXPECT_EQ(m.evolve(State{3.5, 1}, 10.0, rng), (State{3.5, 1}));
}

TEST(Motion, BrownianMeanAndVariance) {
  const MotionModel m = MotionModel::brownian(0.0, 1.0);
  Stream rng(2);
  std::vector<double> x, x2;
  for (int i = 0; i < 100000; ++i) {
    const double v = m.evolve(State{}, 0.7, rng).x;
    x.push_back(v);
    x2.push_back(v * v);
  }
  const auto [mx, sx] = testing::mean_se(x);
  const auto [mx2, sx2] = testing::mean_se(x2);
  EXPECT_LT(testing::z_score(mx, sx, 0.0), 4.0);
  EXPECT_LT(testing::z_score(mx2, sx2, 0.7), 4.0);
}

// Exact OU transition against an independent fine-step Euler-Maruyama oracle.
TEST(Motion, OrnsteinUhlenbeckMatchesFineEuler) {
  const double beta = 1.5, alpha = 0.5, sigma = 0.7, x0 = 2.0, dt = 1.0;
  const MotionModel m = MotionModel::ornstein_uhlenbeck(beta, alpha, sigma);
  Stream rng(3);
  const int n = 10000;
  std::vector<double> exact;
  for (int i = 0; i < n; ++i) exact.push_back(m.evolve(State{x0, 0}, dt, rng).x);

  std::mt19937_64 gen(4);
  std::normal_distribution<double> z(0.0, 1.0);
  const int steps = 4096;
  const double h = dt / steps;
  std::vector<double> euler;
  for (int i = 0; i < n; ++i) {
    double x = x0;
    for (int k = 0; k < steps; ++k) x += -beta * (x - alpha) * h + sigma * std::sqrt(h) * z(gen);
    euler.push_back(x);
  }
  const auto [me, se] = testing::mean_se(exact);
  const auto [mo, so] = testing::mean_se(euler);
  EXPECT_LT(std::abs(me - mo) / std::hypot(se, so), 3.0);
  EXPECT_LT(testing::z_score(me, se, alpha + (x0 - alpha) * std::exp(-beta * dt)), 4.0);
}

TEST(Motion, EulerHalvingIsStable) {
  auto drift = [](double x) { return -x; };
  auto vol = [](double) { return 1.0; };
  const MotionModel coarse = MotionModel::diffusion(drift, vol, 1.0 / 64.0);
  const MotionModel fine = MotionModel::diffusion(drift, vol, 1.0 / 128.0);
  std::vector<double> a, b;
  Stream ra(5);
  Stream rb(6);
  for (int i = 0; i < 10000; ++i) {
    const double xa = coarse.evolve(State{1.0, 0}, 1.0, ra).x;
    const double xb = fine.evolve(State{1.0, 0}, 1.0, rb).x;
    a.push_back(xa * xa);
    b.push_back(xb * xb);
  }
  const auto [ma, sa] = testing::mean_se(a);
  const auto [mb, sb] = testing::mean_se(b);
  EXPECT_LT(std::abs(ma - mb) / std::hypot(sa, sb), 4.0);
}

TEST(Motion, LevyMeanIncludesUncompensatedJumps) {
  LevyParameters p;
  p.drift = 0.3;
  p.vol = 0.5;
  p.jump_rate = 1.5;
  p.jumps = {{2.0, 0.5}, {-0.5, 0.5}};
  const MotionModel m = MotionModel::levy(p);
  EXPECT_TRUE(m.has_jumps());
  Stream rng(7);
  std::vector<double> x;
  for (int i = 0; i < 50000; ++i) x.push_back(m.evolve(State{}, 2.0, rng).x);
  const auto [mx, sx] = testing::mean_se(x);
  EXPECT_LT(testing::z_score(mx, sx, (0.3 + 1.5 * 2.0 * 0.5) * 2.0), 4.0);
}

TEST(MotionPath, DeterministicGridIsExact) {
  const MotionModel m = MotionModel::deterministic(1.0);
  Stream rng(8);
  const auto path = m.evolve_path(State{1.0, 0}, 1.0, 0.25, rng);
  ASSERT_EQ(path.size(), 5u);
  for (const auto& p : path) EXPECT_NEAR(p.state.x, 1.0 + p.t, 1e-15);
}

TEST(MotionPath, CoarseGridGivesEndpoints) {
  const MotionModel m = MotionModel::brownian(0.0, 1.0);
  Stream rng(9);
  const auto path = m.evolve_path(State{}, 0.5, 1.0, rng);
  ASSERT_EQ(path.size(), 2u);
  EXPECT_EQ(path.front().t, 0.0);
  EXPECT_EQ(path.back().t, 0.5);
}

TEST(MotionPath, EndpointMatchesEvolve) {
  const MotionModel m = MotionModel::ornstein_uhlenbeck(1.0, 0.0, 1.0);
  Stream a(10);
  Stream b(10);
  const auto path = m.evolve_path(State{0.3, 0}, 1.3, 0.1, a);
  EXPECT_EQ(path.back().state, m.evolve(State{0.3, 0}, 1.3, b));
}

TEST(MotionPath, BrownianQuadraticVariation) {
  const double sigma = 1.3;
  const MotionModel m = MotionModel::brownian(0.2, sigma);
  Stream rng(11);
  const auto path = m.evolve_path(State{}, 1.0, 1.0 / 1024.0, rng);
  double qv = 0.0;
  for (std::size_t k = 1; k < path.size(); ++k) {
    const double d = path[k].state.x - path[k - 1].state.x;
    qv += d * d;
  }
  EXPECT_NEAR(qv, sigma * sigma, 0.1 * sigma * sigma);
}

TEST(Motion, NonFiniteStateThrows) {
  const MotionModel m = MotionModel::diffusion([](double x) { return x * x * x * x; }, [](double) { return 0.0; }, 0.1);
  Stream rng(12);
  try {
    (void)m.evolve(State{1e80, 0}, 10.0, rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonFiniteState);
  }
}

}  // namespace
}  // namespace gwspine
