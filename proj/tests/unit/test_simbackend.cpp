// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>

#include "modigen/error.hpp"
#include "modigen/parser.hpp"
#include "modigen/simbackend.hpp"
#include "test_support.hpp"

namespace modigen {
namespace {

Component one(std::string_view src) {
    auto comps = parse_unit(src);
    EXPECT_EQ(comps.size(), 1u);
    return comps.front();
}

const Trajectory& var(const std::vector<Trajectory>& ts, std::string_view name) {
    for (const auto& t : ts)
        if (t.variable == name) return t;
    throw std::runtime_error("no trajectory " + std::string(name));
}

TEST(Csv, ParseQuotedAndRepeatedTimes) {
    const auto ts = parse_trajectory_csv("\"time\",\"a.b\",c\n0,1,2\n0.5,3,4\n0.5,5,6\n1,7,8\n");
    ASSERT_EQ(ts.size(), 2u);
    EXPECT_EQ(ts[0].variable, "a.b");
    EXPECT_EQ(ts[0].times, (std::vector<double>{0, 0.5, 1}));
    EXPECT_EQ(ts[0].values, (std::vector<double>{1, 5, 7}));
    EXPECT_THROW(parse_trajectory_csv("t,a\n0,1\n1,2\n"), FormatError);
    EXPECT_THROW(parse_trajectory_csv("time,a\n0,1\n"), FormatError);
    EXPECT_THROW(parse_trajectory_csv("time,a\n0,1\n1,x\n"), FormatError);
}

TEST(Csv, RoundTrip) {
    std::vector<Trajectory> ts = {{"x", {0, 0.1, 0.2}, {1.0, 1.0 / 3.0, -2e-300}}, {"y", {0, 0.1, 0.2}, {0, 1, 2}}};
    EXPECT_EQ(parse_trajectory_csv(trajectories_to_csv(ts)), ts);
}

TEST(Trajectory, Checks) {
    EXPECT_NO_THROW(check_trajectory({"x", {0, 1}, {1, 2}}));
    EXPECT_THROW(check_trajectory({"x", {0, 0}, {1, 2}}), FormatError);
    EXPECT_THROW(check_trajectory({"x", {0, 1}, {1}}), FormatError);
    EXPECT_THROW(check_trajectory({"x", {0}, {1}}), FormatError);
}

TEST(Micro, ConstantDerivativeExact) {
    const auto ts = micro_simulate(one("model A Real x(start=0); equation der(x) = 1; end A;"), {});
    EXPECT_NEAR(var(ts, "x").values.back(), 1.0, 1e-9);
    EXPECT_NEAR(var(ts, "x").times.back(), 1.0, 1e-12);
}

TEST(Micro, ExponentialDecay) {
    const auto ts = micro_simulate(one(test::fixture_text("corpus/10_Decay.mo")), {});
    EXPECT_NEAR(var(ts, "x").values.back(), std::exp(-1.0), 1e-3);
}

TEST(Micro, AlgebraicsAndBooleans) {
    const auto ts = micro_simulate(one("model A\n  parameter Real k = 2;\n  Real x(start=1);\n  Real y;\n  Boolean big;\n"
                                       "equation\n  der(x) = -x;\n  y = k*x + sin(0);\n  big = x > 0.5;\nend A;"),
                                   {});
    const auto& x = var(ts, "x");
    const auto& y = var(ts, "y");
    const auto& big = var(ts, "big");
    for (std::size_t i = 0; i < x.values.size(); ++i) {
        ASSERT_DOUBLE_EQ(y.values[i], 2 * x.values[i]);
        ASSERT_EQ(big.values[i], x.values[i] > 0.5 ? 1.0 : 0.0);
    }
}

TEST(Micro, BouncingBallEvent) {
    const Component c = one(test::fixture_text("listings/BouncingBallRadius.mo"));
    SimSettings s;
    const auto ts = micro_simulate(c, s);
    const auto& h = var(ts, "height");
    const auto& v = var(ts, "velocity");
    std::size_t e = 0;
    for (std::size_t i = 1; i < v.values.size(); ++i)
        if (v.values[i] > 0 && v.values[i - 1] < 0) {
            e = i;
            break;
        }
    ASSERT_GT(e, 0u);
    EXPECT_NEAR(h.times[e], std::sqrt(2 * 0.9 / 9.81), 2e-3);
    const double before = v.values[e - 1] - 9.81 * s.step;
    EXPECT_EQ(v.values[e], -0.9 * before);
}

TEST(Micro, Unsupported) {
    EXPECT_THROW(micro_simulate(one(test::fixture_text("listings/Test_RealGreat.mo")), {}), UnsupportedConstruct);
    EXPECT_THROW(micro_simulate(one(test::fixture_text("corpus/07_Gain.mo")), {}), UnsupportedConstruct);
    EXPECT_THROW(micro_simulate(one("model A Real x; equation der(x) = y; end A;"), {}), UnsupportedConstruct);
    EXPECT_THROW(micro_simulate(one("model A Real x; Real y; equation der(x) = 1; end A;"), {}), UnsupportedConstruct);
    EXPECT_THROW(micro_simulate(one("model A Real x; equation der(x) = 1; der(x) = 2; end A;"), {}), UnsupportedConstruct);
    EXPECT_THROW(micro_simulate(one("model A Real x; equation der(x) = pre(x); end A;"), {}), UnsupportedConstruct);
    EXPECT_THROW(micro_simulate(one(test::fixture_text("listings/BouncingBall.mo")), {}), UnsupportedConstruct);
}

TEST(Micro, NumericError) {
    SimSettings s;
    s.stop_time = 3;
    try {
        micro_simulate(one("model A Real x(start=1); equation der(x) = x*x*x*x; end A;"), s);
        FAIL();
    } catch (const NumericError& e) {
        EXPECT_GT(e.time(), 0.0);
        EXPECT_LT(e.time(), 3.0);
    }
}

TEST(MicroProperty, SampleCountAndSharedGrid) {
    const Component c = one(test::fixture_text("corpus/11_Oscillator.mo"));
    for (double stop : {0.5, 1.0, 2.0, 0.75}) {
        for (double h : {0.25, 0.125, 1.0 / 64, 1.0 / 1024}) {
            SimSettings s;
            s.stop_time = stop;
            s.step = h;
            const auto ts = micro_simulate(c, s);
            const auto expected = static_cast<std::size_t>(std::floor(stop / h)) + 1;
            EXPECT_EQ(micro_sample_count(s), expected);
            for (const auto& t : ts) {
                ASSERT_EQ(t.times.size(), expected);
                ASSERT_EQ(t.times, ts.front().times);
            }
        }
    }
    SimSettings s;
    EXPECT_EQ(micro_sample_count(s), 1001u);
}

TEST(MicroProperty, Deterministic) {
    const Component c = one(test::fixture_text("listings/BouncingBallRadius.mo"));
    const auto first = micro_simulate(c, {});
    for (int i = 0; i < 5; ++i) EXPECT_EQ(micro_simulate(c, {}), first);
}

TEST(MicroProperty, ReinitBitExact) {
    // For every event, the stored value equals the reinit expression applied to the pre-event value.
    for (double c : {0.9, 0.5, 0.75, 1.0}) {
        const std::string src = "model B\n  parameter Real c = " + std::to_string(c) +
                                ";\n  Real h(start=1);\n  Real v(start=0);\nequation\n  der(h) = v;\n  der(v) = -9.81;\n"
                                "  when h <= 0 then\n    reinit(v, -c*pre(v));\n  end when;\nend B;";
        SimSettings s;
        s.stop_time = 3;
        const auto ts = micro_simulate(one(src), s);
        const auto& v = var(ts, "v");
        int events = 0;
        for (std::size_t i = 1; i < v.values.size(); ++i) {
            const double free = v.values[i - 1] - 9.81 * s.step;
            if (v.values[i] != free) {
                ++events;
                EXPECT_EQ(v.values[i], -std::stod(std::to_string(c)) * free) << "c=" << c << " i=" << i;
            }
        }
        EXPECT_GE(events, 1);
    }
}

TEST(MicroSession, LoadCheckSimulate) {
    auto s = make_micro_backend();
    auto r = s->load_code(test::fixture_text("listings/BouncingBall.mo"));
    EXPECT_TRUE(r.ok);
    const auto check = s->check("BouncingBall");
    EXPECT_FALSE(check.ok);
    ASSERT_FALSE(check.diagnostics.empty());
    EXPECT_NE(check.diagnostics[0].message.find("redius"), std::string::npos);
    EXPECT_EQ(check.diagnostics[0].stage, Stage::Check);

    EXPECT_TRUE(s->load_code(test::fixture_text("listings/BouncingBallRadius.mo")).ok);
    EXPECT_TRUE(s->check("BouncingBall").ok);
    const auto sim = s->simulate("BouncingBall", {});
    ASSERT_TRUE(sim.ok);
    EXPECT_EQ(sim.trajectories.size(), 2u);

    EXPECT_TRUE(s->load_code(test::fixture_text("corpus/08_Square.mo")).ok);
    EXPECT_TRUE(s->check("Square").ok);
}

TEST(MockBackend, ScriptedOutcomes) {
    auto s = make_mock_backend_from_json(R"({
      "defaults": {"load": "ok", "check": "ok", "simulate": "fail"},
      "models": {
        "Bad": {"load": {"ok": false, "message": "missing semicolon", "line": 3, "column": 14}},
        "Good": {"simulate": {"ok": true, "trajectories": {"y": {"constant": 1.0, "start": 0, "stop": 1, "points": 5}}}},
        "Boom": {"check": "crash"}
      }})");
    auto bad = s->load_code("model Bad\n  Real x;\nend Bad;");
    ASSERT_FALSE(bad.ok);
    EXPECT_EQ(bad.diagnostics[0].located(), "3:14: missing semicolon");
    EXPECT_FALSE(s->check("Bad").ok);
    EXPECT_FALSE(s->simulate("Bad", {}).ok);

    ASSERT_TRUE(s->load_code("model Good end Good;").ok);
    const auto sim = s->simulate("Good", {});
    ASSERT_TRUE(sim.ok);
    ASSERT_EQ(sim.trajectories.size(), 1u);
    EXPECT_EQ(sim.trajectories[0].values, std::vector<double>(5, 1.0));
    EXPECT_DOUBLE_EQ(sim.trajectories[0].times.back(), 1.0);

    ASSERT_TRUE(s->load_code("model Other end Other;").ok);
    EXPECT_TRUE(s->check("Other").ok);
    EXPECT_FALSE(s->simulate("Other", {}).ok);

    ASSERT_TRUE(s->load_code("model Boom end Boom;").ok);
    EXPECT_THROW(s->check("Boom"), BackendUnavailable);
    EXPECT_FALSE(s->alive());
}

TEST(MockBackend, RealParseErrorsWhenUnscripted) {
    auto s = make_mock_backend_from_json(R"({"defaults": {"load": "ok"}})");
    const auto r = s->load_code("model A\n  Real x\nend A;");
    ASSERT_FALSE(r.ok);
    EXPECT_EQ(r.diagnostics[0].line, 2);
    EXPECT_NE(r.diagnostics[0].message.find("missing semicolon"), std::string::npos);
}

TEST(MockBackend, FixtureErrors) {
    EXPECT_THROW(make_mock_backend_from_json("[]"), FixtureFormatError);
    EXPECT_THROW(make_mock_backend_from_json(R"({"defaults": {"load": "maybe"}})"), FixtureFormatError);
    EXPECT_THROW(make_mock_backend_from_json("{"), FixtureFormatError);
    EXPECT_THROW(make_mock_backend(test::fixture("nope.json")), Error);
    EXPECT_NO_THROW(make_mock_backend(test::fixture("ac8/mock.json")));
}

#if defined(MODIGEN_HAVE_PYTHON)
TEST(OmcAdapter, ProtocolWithFakeCompiler) {
    test::TempDir dir;
    OmcOptions o;
    o.executable = MODIGEN_FAKE_OMC;
    o.workdir = dir.path();
    auto s = make_omc_backend(o);
    EXPECT_TRUE(s->load_code(test::fixture_text("listings/BouncingBallRadius.mo")).ok);
    EXPECT_TRUE(s->check("BouncingBall").ok);
    const auto sim = s->simulate("BouncingBall", {});
    ASSERT_TRUE(sim.ok);
    EXPECT_NO_THROW(var(sim.trajectories, "height"));
    EXPECT_NO_THROW(var(sim.trajectories, "velocity"));

    const auto missing = s->check("NoSuchModel");
    EXPECT_FALSE(missing.ok);
    ASSERT_FALSE(missing.diagnostics.empty());
    EXPECT_NE(missing.diagnostics[0].message.find("Class NoSuchModel not found"), std::string::npos);

    const auto bad = s->load_code("model Lag\n  parameter Real T = 0.5\n  Real y;\nend Lag;\n");
    ASSERT_FALSE(bad.ok);
    EXPECT_EQ(bad.diagnostics[0].line, 2);
    EXPECT_EQ(bad.diagnostics[0].message, "Missing token: SEMICOLON");
    EXPECT_TRUE(s->load_library("Modelica").ok);
    EXPECT_FALSE(s->load_library("Nope").ok);
}

TEST(OmcAdapter, TimeoutAndCrash) {
    test::TempDir dir;
    OmcOptions o;
    o.executable = MODIGEN_FAKE_OMC;
    o.workdir = dir.path();
    o.request_timeout = 0.5;
    ::setenv("FAKE_OMC_MODE", "hang", 1);
    auto s = make_omc_backend(o);
    EXPECT_THROW(s->check("A"), ProtocolTimeout);
    ::setenv("FAKE_OMC_MODE", "crash", 1);
    EXPECT_THROW(s->check("A"), BackendUnavailable);
    ::unsetenv("FAKE_OMC_MODE");
}
#endif

TEST(OmcAdapter, MissingExecutable) {
    OmcOptions o;
    o.executable = "/nonexistent/omc";
    EXPECT_THROW(make_omc_backend(o), SpawnError);
    EXPECT_FALSE(find_executable("definitely-not-a-real-binary-xyz").has_value());
    EXPECT_TRUE(find_executable("sh").has_value());
}

}  // namespace
}  // namespace modigen
