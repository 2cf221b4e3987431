// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <sstream>

#include "dispatch.hpp"
#include "json.hpp"
#include "modigen/io.hpp"
#include "test_support.hpp"

namespace modigen {
namespace {

namespace fs = std::filesystem;

struct CliRun {
    int code;
    std::string out;
    std::string err;
};

CliRun run(std::vector<std::string> args) {
    args.insert(args.begin(), "modigen");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

fs::path copy_fixture(const test::TempDir& dir, const std::string& name) {
    fs::copy(test::fixture(name), dir / name, fs::copy_options::recursive);
    return dir / name;
}

TEST(Cli, NoArgumentsIsUsageError) {
    const CliRun r = run({});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("Usage"), std::string::npos);
    EXPECT_TRUE(r.out.empty());
}

TEST(Cli, UnknownFlagPrintsSubcommandHelp) {
    const CliRun r = run({"evaluate", "--bogus"});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("--reports"), std::string::npos);
}

TEST(Cli, MissingInputIsOperationalError) {
    const CliRun r = run({"evaluate", "--reports", "missing.jsonl"});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("missing.jsonl"), std::string::npos);
}

TEST(Cli, HelpAndVersion) {
    EXPECT_EQ(run({"--help"}).code, 0);
    const CliRun v = run({"--version"});
    EXPECT_EQ(v.code, 0);
    EXPECT_FALSE(v.out.empty());
}

TEST(Cli, PreprocessGraphQuery) {
    test::TempDir dir;
    write_file_atomic(dir / "instr.txt", "Write the Modelica component {source}.");
    write_file_atomic(dir / "query.txt", "{description}: {documentation}");
    const CliRun p = run({"preprocess", "--lib-root", test::fixture("ac9_lib/SynthLib").string(), "--lib-name", "SynthLib",
                       "--modelica-version", "4.0.0", "--out", (dir / "all.jsonl").string(), "--sft-out",
                       (dir / "sft.jsonl").string(), "--instruction-template", (dir / "instr.txt").string(),
                       "--query-template", (dir / "query.txt").string(), "--reject-log", (dir / "rej.jsonl").string()});
    ASSERT_EQ(p.code, 0) << p.err;
    EXPECT_EQ(read_jsonl_lines(dir / "all.jsonl").size(), 6u);
    EXPECT_EQ(read_jsonl_lines(dir / "sft.jsonl").size(), 6u);
    EXPECT_EQ(read_jsonl_lines(dir / "rej.jsonl").size(), 4u);

    const auto manifest = nlohmann::json::parse(read_file(dir / "all.jsonl.manifest.json"));
    EXPECT_EQ(manifest["subcommand"], "preprocess");
    EXPECT_EQ(manifest["exit_code"], 0);
    EXPECT_EQ(manifest["flags"]["lib-name"], "SynthLib");
    EXPECT_EQ(manifest["input_digests"].size(), 12u);  // 10 library files and 2 templates

    ASSERT_EQ(run({"graph", "build", "--corpus", (dir / "all.jsonl").string(), "--out", (dir / "g.json").string()}).code, 0);
    const CliRun q = run({"graph", "query", "--index", (dir / "g.json").string(), "--query", "spring stiffness", "--budget",
                       "2000"});
    ASSERT_EQ(q.code, 0) << q.err;
    const auto first = nlohmann::json::parse(q.out.substr(0, q.out.find('\n')));
    EXPECT_EQ(first["source_label"], "SynthLib.Mechanics.Spring");
    EXPECT_TRUE(first.contains("score"));
    EXPECT_TRUE(first.contains("text"));
}

TEST(Cli, FailedRunWritesNoPartialOutput) {
    test::TempDir dir;
    write_file_atomic(dir / "query.txt", "{description}");
    write_file_atomic(dir / "instr.txt", "{unknown_placeholder}");
    const CliRun p = run({"preprocess", "--lib-root", test::fixture("ac9_lib/SynthLib").string(), "--lib-name", "SynthLib",
                       "--modelica-version", "4.0.0", "--out", (dir / "all.jsonl").string(), "--sft-out",
                       (dir / "sft.jsonl").string(), "--instruction-template", (dir / "instr.txt").string(),
                       "--query-template", (dir / "query.txt").string(), "--manifest-out", (dir / "m.json").string()});
    EXPECT_EQ(p.code, 1);
    EXPECT_FALSE(fs::exists(dir / "all.jsonl"));
    EXPECT_FALSE(fs::exists(dir / "sft.jsonl"));
    const auto manifest = nlohmann::json::parse(read_file(dir / "m.json"));
    EXPECT_EQ(manifest["exit_code"], 1);
    for (const auto& e : fs::directory_iterator(dir.path()))
        EXPECT_EQ(e.path().filename().string().find(".tmp"), std::string::npos) << e.path();
}

TEST(Cli, StagesByHand) {
    test::TempDir dir;
    const fs::path ac8 = copy_fixture(dir, "ac8");
    const std::string script = "file://" + (ac8 / "responses.jsonl").string();
    const auto path = [&](const char* f) { return (dir / f).string(); };
    CliRun r = run({"generate", "--task", "component", "--bench", (ac8 / "bench.jsonl").string(), "--n", "1",
                 "--endpoint", script, "--model", "scripted", "--out", path("cands.jsonl")});
    ASSERT_EQ(r.code, 0) << r.err;
    r = run({"validate", "--candidates", path("cands.jsonl"), "--bench", (ac8 / "bench.jsonl").string(), "--backend",
             "mock", "--fixture", (ac8 / "mock.json").string(), "--out", path("reports.jsonl")});
    ASSERT_EQ(r.code, 0) << r.err;
    r = run({"evaluate", "--reports", path("reports.jsonl"), "--scenario", "1"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out, "scope,pass_s@1,pass_s@1,pass_f@1,pass_f@1\noverall,0.0000,0.0000,0.0000,0.0000\n");

    // the repair stage replays the second scripted reply; skip the first by pointing at a copy
    auto lines = read_jsonl_lines(ac8 / "responses.jsonl");
    write_file_atomic(dir / "repair.jsonl", lines[1] + "\n");
    r = run({"repair", "--candidates", path("cands.jsonl"), "--reports", path("reports.jsonl"), "--bench",
             (ac8 / "bench.jsonl").string(), "--backend", "mock", "--fixture", (ac8 / "mock.json").string(),
             "--endpoint", "file://" + path("repair.jsonl"), "--model", "scripted", "--rounds", "1", "--out",
             path("repaired.jsonl"), "--attempts-out", path("attempts.jsonl"), "--reports-out", path("final.jsonl")});
    ASSERT_EQ(r.code, 0) << r.err;
    r = run({"evaluate", "--reports", path("final.jsonl"), "--scenario", "1", "--out", path("m.csv")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(read_file(dir / "m.csv"), "scope,pass_s@1,pass_s@1,pass_f@1,pass_f@1\noverall,1.0000,1.0000,1.0000,1.0000\n");
}

TEST(Cli, MockBackendNeedsFixture) {
    test::TempDir dir;
    const CliRun r = run({"validate", "--candidates", "c", "--bench", "b", "--backend", "mock", "--out", (dir / "o").string()});
    EXPECT_EQ(r.code, 1);
}

TEST(Cli, PipelineRerunIsByteIdentical) {
    test::TempDir a, b;
    const fs::path ca = copy_fixture(a, "ac10");
    const fs::path cb = copy_fixture(b, "ac10");
    ASSERT_EQ(run({"pipeline", "--config", (ca / "run.json").string()}).code, 0);
    ASSERT_EQ(run({"pipeline", "--config", (cb / "run.json").string()}).code, 0);
    for (const char* f : {"candidates.jsonl", "reports.jsonl", "repaired.jsonl", "attempts.jsonl", "final_reports.jsonl",
                          "metrics.csv"})
        EXPECT_EQ(read_file(ca / "out" / f), read_file(cb / "out" / f)) << f;
    EXPECT_TRUE(fs::exists(ca / "out" / "manifest.json"));
}

TEST(Cli, PipelineConfigErrors) {
    test::TempDir dir;
    write_file_atomic(dir / "bad.json", R"({"bench": "b.jsonl", "endpoint": "file://r.jsonl", "out_dir": "o", "typo": 1})");
    CliRun r = run({"pipeline", "--config", (dir / "bad.json").string()});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("typo"), std::string::npos);
    write_file_atomic(dir / "bad.json", R"({"bench": "b.jsonl"})");
    EXPECT_EQ(run({"pipeline", "--config", (dir / "bad.json").string()}).code, 1);
}

}  // namespace
}  // namespace modigen
