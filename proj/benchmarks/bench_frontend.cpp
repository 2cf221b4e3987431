// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <filesystem>

#include "modigen/clean.hpp"
#include "modigen/io.hpp"
#include "modigen/lexer.hpp"
#include "modigen/parser.hpp"

namespace {

std::string corpus_text() {
    std::string all;
    for (const auto& e : std::filesystem::directory_iterator(std::filesystem::path(MODIGEN_FIXTURES_DIR) / "corpus"))
        if (e.path().extension() == ".mo") all += modigen::read_file(e.path()) + "\n";
    return all;
}

void BM_Tokenize(benchmark::State& state) {
    const std::string src = corpus_text();
    for (auto _ : state) benchmark::DoNotOptimize(modigen::tokenize(src));
    state.SetBytesProcessed(static_cast<int64_t>(state.iterations() * src.size()));
}
BENCHMARK(BM_Tokenize);

void BM_ParseListing(benchmark::State& state) {
    const std::string src =
        modigen::read_file(std::filesystem::path(MODIGEN_FIXTURES_DIR) / "listings" / "Test_RealGreat.mo");
    for (auto _ : state) benchmark::DoNotOptimize(modigen::parse_unit(src));
}
BENCHMARK(BM_ParseListing);

void BM_StripAnnotations(benchmark::State& state) {
    const std::string src = corpus_text();
    for (auto _ : state) benchmark::DoNotOptimize(modigen::strip_annotations(src));
    state.SetBytesProcessed(static_cast<int64_t>(state.iterations() * src.size()));
}
BENCHMARK(BM_StripAnnotations);

}  // namespace
