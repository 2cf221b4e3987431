// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <atomic>
#include <mutex>
#include <random>
#include <set>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "modigen/error.hpp"
#include "modigen/genclient.hpp"
#include "modigen/io.hpp"
#include "test_support.hpp"

namespace modigen {
namespace {

using json = nlohmann::json;

class RecordingTransport : public ChatTransport {
public:
    explicit RecordingTransport(std::function<std::string(int)> reply) : reply_(std::move(reply)) {}
    std::string complete(const ChatRequest& r) override {
        int call;
        {
            std::lock_guard<std::mutex> lock(mutex_);
            call = calls_++;
            requests_.push_back(r);
        }
        return reply_(call);
    }
    int calls() const { return calls_; }
    std::vector<ChatRequest> requests() const { return requests_; }

private:
    std::function<std::string(int)> reply_;
    std::mutex mutex_;
    std::atomic<int> calls_{0};
    std::vector<ChatRequest> requests_;
};

GenerationConfig quick_config(int n) {
    GenerationConfig c;
    c.n_samples = n;
    c.model_name = "m";
    c.endpoint_url = "http://localhost";
    c.retry_base_delay = 0.0;
    return c;
}

TEST(GenClient, Defaults) {
    EXPECT_EQ(default_scenario(TaskKind::ComponentGeneration), 8);
    EXPECT_EQ(default_scenario(TaskKind::TestCaseGeneration), 5);
    EXPECT_DOUBLE_EQ(default_generation_config(TaskKind::ComponentGeneration).temperature, 0.3);
    EXPECT_DOUBLE_EQ(default_generation_config(TaskKind::TestCaseGeneration).temperature, 0.7);
    EXPECT_EQ(task_kind_from_string("testcase"), TaskKind::TestCaseGeneration);
    EXPECT_EQ(task_kind_from_string("ComponentGeneration"), TaskKind::ComponentGeneration);
    EXPECT_THROW(task_kind_from_string("other"), Error);
}

TEST(GenClient, ConfigValidation) {
    GenerationConfig c = quick_config(1);
    EXPECT_NO_THROW(c.validate());
    c.n_samples = 0;
    EXPECT_THROW(c.validate(), Error);
    c = quick_config(1);
    c.temperature = -0.1;
    EXPECT_THROW(c.validate(), Error);
}

TEST(GenClient, RequestBody) {
    ChatRequest r{"gpt", "hello", 0.3, 100, std::nullopt};
    const json j = json::parse(chat_request_body(r));
    EXPECT_EQ(j["model"], "gpt");
    EXPECT_EQ(j["messages"][0]["role"], "user");
    EXPECT_EQ(j["messages"][0]["content"], "hello");
    EXPECT_DOUBLE_EQ(j["temperature"].get<double>(), 0.3);
    EXPECT_EQ(j["max_tokens"], 100);
    EXPECT_EQ(j["n"], 1);
    EXPECT_FALSE(j.contains("top_k"));
    r.top_k = 10;
    EXPECT_EQ(json::parse(chat_request_body(r))["top_k"], 10);
}

TEST(GenClient, TopKOnlyWhenDeclared) {
    RecordingTransport t([](int) { return std::string("x"); });
    GenerationConfig c = quick_config(1);
    c.top_k = 10;
    sample(c, t, "t", "p");
    c.endpoint_accepts_top_k = true;
    sample(c, t, "t", "p");
    const auto reqs = t.requests();
    EXPECT_FALSE(reqs[0].top_k.has_value());
    EXPECT_EQ(reqs[1].top_k, 10);
}

TEST(GenClient, ParseResponse) {
    EXPECT_EQ(parse_chat_response(R"({"choices":[{"message":{"role":"assistant","content":"hi"}}]})"), "hi");
    EXPECT_THROW(parse_chat_response(R"({"choices":[]})"), TransportError);
    EXPECT_THROW(parse_chat_response("<html>"), TransportError);
}

TEST(GenClient, ExtractCode) {
    EXPECT_EQ(extract_code("Sure:\n```modelica\nmodel A\nend A;\n```\nDone."), "model A\nend A;");
    EXPECT_EQ(extract_code("```python\nx=1\n```\n```\nmodel B end B;\n```"), "model B end B;");
    EXPECT_EQ(extract_code("Here it is\nmodel C\n  Real x;\nend C;\nHope it helps"), "model C\n  Real x;\nend C;");
    EXPECT_EQ(extract_code("no code at all"), "no code at all");
}

TEST(GenClient, ExtractCodeIdempotentOnFenced) {
    for (const char* s : {"```modelica\nmodel A end A;\n```", "text\n```\nblock B\nend B;\n```\nmore",
                          "```modelica\n```"}) {
        const std::string once = extract_code(s);
        EXPECT_EQ(extract_code(once), once) << s;
    }
}

TEST(GenClient, AssemblePrompt) {
    BenchTask t;
    t.prompt = "Write X.";
    EXPECT_EQ(assemble_prompt(t), "Write X.");
    RetrievalResult r;
    r.snippets.push_back({2.0, "Lib.A", "model A end A;"});
    EXPECT_EQ(assemble_prompt(t, &r), "Reference context:\n--- Lib.A ---\nmodel A end A;\nEnd of reference context.\n\nWrite X.");
    t.kind = TaskKind::TestCaseGeneration;
    t.dependencies = {"Modelica", "ICS"};
    EXPECT_EQ(assemble_prompt(t),
              "Reference context:\nRequired libraries: Modelica, ICS\nEnd of reference context.\n\nWrite X.");
    EXPECT_EQ(assemble_prompt(t, &r), assemble_prompt(t, &r));
}

TEST(GenClient, RetriesThenSucceeds) {
    RecordingTransport t([](int call) -> std::string {
        if (call < 2) throw TransportError("flaky");
        return "```\nmodel A end A;\n```";
    });
    const auto out = sample(quick_config(1), t, "task", "p");
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(out[0].code, "model A end A;");
    EXPECT_EQ(t.calls(), 3);
}

TEST(GenClient, RetriesExhausted) {
    RecordingTransport t([](int) -> std::string { throw TransportError("down"); });
    GenerationConfig c = quick_config(2);
    c.max_retries = 2;
    const auto out = sample(c, t, "task", "p");
    ASSERT_EQ(out.size(), 2u);
    for (const auto& cand : out) {
        EXPECT_TRUE(cand.code.empty());
        EXPECT_EQ(cand.raw_response, "transport error: down");
    }
    EXPECT_EQ(t.calls(), 6);
}

TEST(GenClient, AuthErrorPropagates) {
    RecordingTransport t([](int) -> std::string { throw AuthError("401"); });
    EXPECT_THROW(sample(quick_config(3), t, "task", "p"), AuthError);
}

TEST(GenClientProperty, SampleIndicesExact) {
    std::mt19937 rng(3);
    for (int trial = 0; trial < 30; ++trial) {
        const int n = std::uniform_int_distribution<int>(1, 12)(rng);
        GenerationConfig c = quick_config(n);
        c.max_concurrent_requests = std::uniform_int_distribution<int>(1, 6)(rng);
        RecordingTransport t([](int call) { return "model M" + std::to_string(call) + " end M;"; });
        const auto out = sample(c, t, "task", "p", 2);
        ASSERT_EQ(static_cast<int>(out.size()), n);
        for (int i = 0; i < n; ++i) {
            EXPECT_EQ(out[i].sample_index, i);
            EXPECT_EQ(out[i].round, 2);
            EXPECT_EQ(out[i].task_id, "task");
        }
    }
}

TEST(GenClient, ScriptedTransport) {
    test::TempDir dir;
    write_file_atomic(dir / "r.jsonl", "{\"content\":\"one\"}\n{\"error\":\"boom\"}\n{\"content\":\"two\"}\n{\"status\":401}\n");
    GenerationConfig c = quick_config(2);
    c.endpoint_url = "file://" + (dir / "r.jsonl").string();
    auto t = make_transport(c);
    EXPECT_EQ(t->max_parallel(), 1);
    const auto out = sample(c, *t, "task", "p");
    EXPECT_EQ(out[0].raw_response, "one");
    EXPECT_EQ(out[1].raw_response, "two");  // the error line was retried
    EXPECT_THROW(t->complete({}), AuthError);
    EXPECT_THROW(t->complete({}), TransportError);
}

TEST(GenClient, BenchAndCandidatesIo) {
    test::TempDir dir;
    write_file_atomic(dir / "b.jsonl",
                      R"({"id":"a","kind":"TestCaseGeneration","prompt":"p","dependencies":["Modelica"],"simulation_exempt":true})"
                      "\n"
                      R"({"id":"b","kind":"component","prompt":"q","reference_model":"model R end R;","simulation":{"stop_time":2}})"
                      "\n");
    const auto tasks = read_bench(dir / "b.jsonl");
    ASSERT_EQ(tasks.size(), 2u);
    EXPECT_EQ(tasks[0].kind, TaskKind::TestCaseGeneration);
    EXPECT_TRUE(tasks[0].simulation_exempt);
    EXPECT_EQ(tasks[0].dependencies, std::vector<std::string>{"Modelica"});
    EXPECT_EQ(tasks[1].reference_model, "model R end R;");
    ASSERT_TRUE(tasks[1].simulation.has_value());
    EXPECT_DOUBLE_EQ(tasks[1].simulation->stop_time, 2.0);

    write_file_atomic(dir / "dup.jsonl", "{\"id\":\"a\",\"kind\":\"component\",\"prompt\":\"p\"}\n"
                                         "{\"id\":\"a\",\"kind\":\"component\",\"prompt\":\"q\"}\n");
    EXPECT_THROW(read_bench(dir / "dup.jsonl"), FormatError);

    const std::vector<Candidate> cands = {{"a", 0, "model A end A;", "raw", 0}, {"a", 1, "", "x", 1}};
    write_candidates(cands, dir / "c.jsonl");
    EXPECT_EQ(read_candidates(dir / "c.jsonl"), cands);
}

class LocalServer {
public:
    LocalServer() {
        server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
            last_auth_ = req.get_header_value("Authorization");
            last_body_ = req.body;
            const auto j = json::parse(req.body);
            const std::string content = j["messages"][0]["content"];
            if (content == "deny") {
                res.status = 401;
                return;
            }
            if (content == "fail") {
                res.status = 503;
                return;
            }
            json reply = {{"choices", {{{"message", {{"role", "assistant"}, {"content", "echo: " + content}}}}}}};
            res.set_content(reply.dump(), "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~LocalServer() {
        server_.stop();
        thread_.join();
    }
    std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions"; }

    std::string last_auth_;
    std::string last_body_;

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

TEST(GenClient, HttpTransport) {
    LocalServer server;
    auto t = make_http_transport(server.url(), "secret", 5.0);
    ChatRequest r{"m", "hello", 0.3, 10, std::nullopt};
    EXPECT_EQ(t->complete(r), "echo: hello");
    EXPECT_EQ(server.last_auth_, "Bearer secret");
    EXPECT_EQ(server.last_body_, chat_request_body(r));
    r.prompt = "deny";
    EXPECT_THROW(t->complete(r), AuthError);
    r.prompt = "fail";
    EXPECT_THROW(t->complete(r), TransportError);
    auto dead = make_http_transport("http://127.0.0.1:1/x", "", 1.0);
    EXPECT_THROW(dead->complete(r), TransportError);
}

}  // namespace
}  // namespace modigen
