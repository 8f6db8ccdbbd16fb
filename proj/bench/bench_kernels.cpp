// Serial vs OpenMP trailing-update kernels. The serial versions are the
// references the tests compare against; this only measures speed.
#include <benchmark/benchmark.h>

#include "ca/householder.hpp"

namespace {

void BM_ApplySerial(benchmark::State& state) {
    const auto m = static_cast<std::size_t>(state.range(0));
    const auto c = static_cast<std::size_t>(state.range(1));
    ca::FlopCounter fc;
    auto f = ca::qr_unblocked(ca::gaussian(m, 32, 1), fc);
    auto C = ca::gaussian(m, c, 2);
    for (auto _ : state) {
        ca::FlopCounter k;
        benchmark::DoNotOptimize(ca::apply_q(f, C, true, k));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<long>(m * c));
}

void BM_ApplyOmp(benchmark::State& state) {
    const auto m = static_cast<std::size_t>(state.range(0));
    const auto c = static_cast<std::size_t>(state.range(1));
    ca::FlopCounter fc;
    auto f = ca::qr_unblocked(ca::gaussian(m, 32, 1), fc);
    auto C = ca::gaussian(m, c, 2);
    for (auto _ : state) {
        ca::FlopCounter k;
        benchmark::DoNotOptimize(ca::apply_q_omp(f, C, true, k));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<long>(m * c));
}

}  // namespace

BENCHMARK(BM_ApplySerial)->Args({1024, 64})->Args({4096, 256});
BENCHMARK(BM_ApplyOmp)->Args({1024, 64})->Args({4096, 256});

BENCHMARK_MAIN();
