#include <benchmark/benchmark.h>

#include <random>

#include "gridtopo/hssp.hpp"
#include "gridtopo/measurement.hpp"
#include "gridtopo/random.hpp"
#include "gridtopo/subset_sum.hpp"

using namespace gridtopo;

namespace {

SubsetQuery random_query(std::size_t pool, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> value(25.0, 50.0);
  SubsetQuery q;
  for (std::size_t i = 0; i < pool; ++i) q.pool.push_back({static_cast<NodeId>(i), value(rng)});
  for (std::size_t i = 0; i < pool; i += 3) q.target += q.pool[i].value;
  q.tolerance = 0.5;
  q.max_size = 8;
  q.limit = kUnlimited;
  return q;
}

template <auto Solve>
void BM_Subset(benchmark::State& state) {
  const SubsetQuery q = random_query(static_cast<std::size_t>(state.range(0)), 11);
  for (auto _ : state) benchmark::DoNotOptimize(Solve(q));
}

struct Instance {
  Topology tree;
  MeasurementMatrix noisy;
};

Instance make_instance(std::size_t n, double sigma) {
  Instance in;
  in.tree = random_radial_topology(n, 4, derive_seed({1, n, 0}));
  const auto loads = sample_loads(in.tree, 10, 25.0, 50.0, derive_seed({1, n, 1}));
  const auto clean = aggregate_readings(in.tree, loads, AggregationMode::kPureSum);
  in.noisy = inject_noise(clean, {sigma, NoiseMode::kAdditive, derive_seed({1, n, 2})});
  return in;
}

void BM_Identify(benchmark::State& state) {
  const Instance in = make_instance(static_cast<std::size_t>(state.range(0)), 0.02);
  HsspOptions o;
  o.hierarchy = std::vector<std::size_t>(in.tree.layers().begin(), in.tree.layers().end());
  for (auto _ : state) benchmark::DoNotOptimize(identify_topology(in.noisy, 0.02, o));
}

void BM_IdentifyFlat(benchmark::State& state) {
  const Instance in = make_instance(static_cast<std::size_t>(state.range(0)), 0.02);
  for (auto _ : state) benchmark::DoNotOptimize(identify_topology(in.noisy, 0.02, HsspOptions{}));
}

}  // namespace

BENCHMARK(BM_Subset<enumerate_exhaustive>)->Name("exhaustive")->DenseRange(12, 20, 4);
BENCHMARK(BM_Subset<solve_branch_bound>)->Name("branch_bound")->DenseRange(12, 36, 8);
BENCHMARK(BM_Subset<solve_meet_middle>)->Name("meet_middle")->DenseRange(12, 36, 8);
BENCHMARK(BM_Identify)->Arg(13)->Arg(33)->Arg(63)->Arg(123)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_IdentifyFlat)->Arg(13)->Arg(33)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
