#include <benchmark/benchmark.h>

#include <omp.h>

#include "rdlcqr/montecarlo.hpp"

using namespace rdlcqr;

namespace {

StudyConfig study() {
    StudyConfig cfg;
    cfg.dgp.n = 500;
    cfg.estimators = {McEstimator::cqr, McEstimator::cqr_bc};
    return cfg;
}

void BM_serial(benchmark::State& state) {
    const StudyConfig cfg = study();
    for (auto _ : state) benchmark::DoNotOptimize(run_study_serial(cfg, int(state.range(0)), 42));
}

void BM_openmp(benchmark::State& state) {
    const StudyConfig cfg = study();
    const int threads = state.range(1) > 0 ? int(state.range(1)) : omp_get_max_threads();
    for (auto _ : state) benchmark::DoNotOptimize(run_study(cfg, int(state.range(0)), 42, threads));
    state.counters["threads"] = threads;
}

} // namespace

BENCHMARK(BM_serial)->Arg(16)->Unit(benchmark::kMillisecond);
// Second argument 0 means all available threads.
BENCHMARK(BM_openmp)->Args({16, 1})->Args({16, 0})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
