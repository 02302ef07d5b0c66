#include <benchmark/benchmark.h>

#include "lyaplab/lyapunov.hpp"
#include "lyaplab/measures.hpp"
#include "lyaplab/systems.hpp"

namespace {

using namespace lyaplab;

GeneratorSet standard_pair() {
  return GeneratorSet::make(
      {make_standard_map(1.2), make_translation({0.41421356237309515, 0.2928932188134525})});
}

void BM_CocycleStep(benchmark::State& state) {
  const GeneratorSet set = standard_pair();
  Vec2 x{0.123, 0.456};
  int symbol = 0;
  for (auto _ : state) {
    const CocycleStep step = cocycle_step(set, symbol, x);
    x = step.x_next;
    symbol ^= 1;
    benchmark::DoNotOptimize(x);
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_CocycleStep);

void BM_IterateQr(benchmark::State& state) {
  const GeneratorSet set = standard_pair();
  const long n = state.range(0);
  for (auto _ : state) {
    const TrajectoryState ts = iterate_qr(set, set.sampler(7), {0.2, 0.7}, n);
    benchmark::DoNotOptimize(ts.log_r);
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_IterateQr)->Arg(1 << 12)->Arg(1 << 16);

void BM_ProjAct(benchmark::State& state) {
  const Mat2 m{2.0, 1.0, 1.0, 1.0};
  ProjPoint p(0.3);
  for (auto _ : state) {
    p = proj_act(m, p);
    benchmark::DoNotOptimize(p);
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_ProjAct);

void BM_CesaroStationary(benchmark::State& state) {
  const GeneratorSet set = standard_pair();
  const GridSpec grid = GridSpec::make(16, 128);
  for (auto _ : state) {
    const GriddedMeasure m = cesaro_stationary(set, grid, state.range(0), 8, 11);
    benchmark::DoNotOptimize(m.weights.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * 8);
}
BENCHMARK(BM_CesaroStationary)->Arg(1 << 12);

}  // namespace

BENCHMARK_MAIN();
