// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <filesystem>

#include "modigen/graph.hpp"
#include "modigen/io.hpp"
#include "modigen/parser.hpp"

namespace {

std::vector<modigen::Component> corpus_components() {
    std::vector<modigen::Component> all;
    for (const auto& e : std::filesystem::directory_iterator(std::filesystem::path(MODIGEN_FIXTURES_DIR) / "corpus")) {
        if (e.path().extension() != ".mo") continue;
        for (auto& c : modigen::parse_unit(modigen::read_file(e.path()))) all.push_back(std::move(c));
    }
    return all;
}

void BM_BuildGraph(benchmark::State& state) {
    const auto comps = corpus_components();
    for (auto _ : state) benchmark::DoNotOptimize(modigen::build_graph(comps));
}
BENCHMARK(BM_BuildGraph);

void BM_Retrieve(benchmark::State& state) {
    const auto graph = modigen::build_graph(corpus_components());
    modigen::RetrievalOptions o;
    o.hops = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(modigen::retrieve(graph, "resistor capacitor pin voltage", o));
}
BENCHMARK(BM_Retrieve)->Arg(1)->Arg(2);

}  // namespace
