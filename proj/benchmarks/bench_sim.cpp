// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <cmath>
#include <filesystem>

#include "modigen/io.hpp"
#include "modigen/parser.hpp"
#include "modigen/simbackend.hpp"
#include "modigen/validate.hpp"

namespace {

void BM_MicroBouncingBall(benchmark::State& state) {
    const auto comps = modigen::parse_unit(
        modigen::read_file(std::filesystem::path(MODIGEN_FIXTURES_DIR) / "listings" / "BouncingBallRadius.mo"));
    modigen::SimSettings s;
    s.step = 1.0 / static_cast<double>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(modigen::micro_simulate(comps.front(), s));
}
BENCHMARK(BM_MicroBouncingBall)->Arg(1000)->Arg(10000);

void BM_CompareTrajectories(benchmark::State& state) {
    modigen::Trajectory ref{"y", {}, {}}, cand{"y", {}, {}};
    for (int i = 0; i <= state.range(0); ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(state.range(0));
        ref.times.push_back(t);
        ref.values.push_back(std::sin(6.283185307179586 * t));
        cand.times.push_back(t);
        cand.values.push_back(std::sin(6.283185307179586 * t) + 0.01);
    }
    modigen::FunctionalSpec spec;
    spec.reference = {ref};
    for (auto _ : state) benchmark::DoNotOptimize(modigen::compare_trajectories({cand}, spec));
}
BENCHMARK(BM_CompareTrajectories)->Arg(1000)->Arg(100000);

}  // namespace
