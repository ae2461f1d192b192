#include <benchmark/benchmark.h>

#include "gwspine/auxiliary.hpp"
#include "gwspine/models.hpp"
#include "gwspine/verify.hpp"

namespace {

using namespace gwspine;

void BM_TreeYule(benchmark::State& state) {
  const auto d = OffspringDistribution::yule();
  const double t = static_cast<double>(state.range(0));
  Stream rng(1);
  std::size_t nodes = 0;
  for (auto _ : state) {
    const GWTree tree = simulate_tree(d, 1.0, t, {}, rng);
    nodes += tree.size();
    benchmark::DoNotOptimize(tree.size());
  }
  state.counters["nodes/s"] = benchmark::Counter(static_cast<double>(nodes), benchmark::Counter::kIsRate);
}
BENCHMARK(BM_TreeYule)->Arg(2)->Arg(4)->Arg(6);

void BM_PopulationBm(benchmark::State& state) {
  const auto model = build_model("yule_splitted_bm").model;
  Stream rng(2);
  for (auto _ : state) {
    const auto pop = simulate_population(model, 4.0, {}, RecordSpec::terminal_only(), rng);
    benchmark::DoNotOptimize(pop.tree().size());
  }
}
BENCHMARK(BM_PopulationBm);

void BM_PopulationPaths(benchmark::State& state) {
  const auto model = build_model("yule_splitted_bm").model;
  Stream rng(3);
  for (auto _ : state) {
    const auto pop = simulate_population(model, 3.0, {}, RecordSpec::paths(1.0 / 64.0), rng);
    benchmark::DoNotOptimize(pop.tree().size());
  }
}
BENCHMARK(BM_PopulationPaths);

void BM_MotionOu(benchmark::State& state) {
  const auto m = MotionModel::ornstein_uhlenbeck(1.0, 0.0, 1.0);
  Stream rng(4);
  State x{};
  for (auto _ : state) {
    x = m.evolve(x, 0.1, rng);
    benchmark::DoNotOptimize(x);
  }
}
BENCHMARK(BM_MotionOu);

void BM_MotionEulerPath(benchmark::State& state) {
  const auto m = MotionModel::diffusion([](double x) { return -x * x * x; }, [](double) { return 1.0; }, 1.0 / 256.0);
  Stream rng(5);
  for (auto _ : state) {
    const auto path = m.evolve_path(State{}, 1.0, 1.0 / 64.0, rng);
    benchmark::DoNotOptimize(path.back());
  }
}
BENCHMARK(BM_MotionEulerPath);

void BM_SpineAdvance(benchmark::State& state) {
  const auto model = build_model("yule_splitted_ou").model;
  const Spine spine(model);
  Stream rng(6);
  for (auto _ : state) {
    SpineState s = spine.start(rng);
    spine.advance_to(s, 10.0, rng);
    benchmark::DoNotOptimize(s.state);
  }
}
BENCHMARK(BM_SpineAdvance);

void BM_CheckManyToOne(benchmark::State& state) {
  const auto model = build_model("yule_splitted_bm").model;
  FixedTimeOptions opts;
  opts.n_tree = 2000;
  opts.n_spine = 2000;
  const auto f = [](const LineageView& v) { return v.state.x * v.state.x; };
  for (auto _ : state) {
    const auto rep = check_many_to_one_fixed(model, f, opts, CheckContext{});
    benchmark::DoNotOptimize(rep.z);
  }
}
BENCHMARK(BM_CheckManyToOne)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
