// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "modigen/metrics.hpp"

namespace {

void BM_PassAtK(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    for (auto _ : state)
        for (int c = 0; c <= n; ++c) benchmark::DoNotOptimize(modigen::pass_at_k(n, c, n / 2 + 1));
}
BENCHMARK(BM_PassAtK)->Arg(10)->Arg(200);

}  // namespace

BENCHMARK_MAIN();
