#include <benchmark/benchmark.h>

#include "posenc/data.hpp"
#include "posenc/kernels.hpp"

using namespace posenc;

namespace {

Model bench_model(ModelKind kind) {
  ModelSpec spec{kind, 1, 16, Interpolation::CubicHermite, {64, 64}, 0.0};
  return build_model(spec, BinGrid(0.0, 1.0, 64), 1);
}

void run(benchmark::State& state, ModelKind kind, bool parallel) {
  const Dataset ds = gen_toy(1, static_cast<std::size_t>(state.range(0)), 0.02);
  const Model m = bench_model(kind);
  const BatchView batch{ds.x, &ds.y, {}};
  GradientWorkspace ws;
  for (auto _ : state) {
    auto r = parallel ? evaluate_batch(m, batch, true, &ws) : evaluate_batch_serial(m, batch, true);
    benchmark::DoNotOptimize(r.mse);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_SerialPosEncLinear(benchmark::State& s) { run(s, ModelKind::PosEncLinear, false); }
void BM_ParallelPosEncLinear(benchmark::State& s) { run(s, ModelKind::PosEncLinear, true); }
void BM_SerialPosEncMlp(benchmark::State& s) { run(s, ModelKind::PosEncMlp, false); }
void BM_ParallelPosEncMlp(benchmark::State& s) { run(s, ModelKind::PosEncMlp, true); }

}  // namespace

BENCHMARK(BM_SerialPosEncLinear)->Arg(512)->Arg(8192);
BENCHMARK(BM_ParallelPosEncLinear)->Arg(512)->Arg(8192);
BENCHMARK(BM_SerialPosEncMlp)->Arg(512)->Arg(8192);
BENCHMARK(BM_ParallelPosEncMlp)->Arg(512)->Arg(8192);

BENCHMARK_MAIN();
