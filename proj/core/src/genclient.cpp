// SPDX-License-Identifier: Apache-2.0
#include "modigen/genclient.hpp"

#include <chrono>
#include <cstdlib>
#include <mutex>
#include <regex>
#include <set>
#include <thread>

#include "httplib.h"
#include "json.hpp"

#include "modigen/error.hpp"
#include "modigen/io.hpp"
#include "modigen/parallel.hpp"
#include "modigen/parser.hpp"

namespace modigen {
using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

std::string_view to_string(TaskKind kind) {
    return kind == TaskKind::ComponentGeneration ? "ComponentGeneration" : "TestCaseGeneration";
}

TaskKind task_kind_from_string(std::string_view s) {
    if (s == "ComponentGeneration" || s == "component") return TaskKind::ComponentGeneration;
    if (s == "TestCaseGeneration" || s == "testcase") return TaskKind::TestCaseGeneration;
    throw FormatError("unknown task kind '" + std::string(s) + "'");
}

int default_scenario(TaskKind kind) { return kind == TaskKind::ComponentGeneration ? 8 : 5; }

void GenerationConfig::validate() const {
    if (!(temperature >= 0.0 && temperature <= 2.0)) throw Error("temperature must be within [0, 2]");
    if (n_samples < 1) throw Error("n_samples must be at least 1");
    if (max_tokens < 1) throw Error("max_tokens must be positive");
    if (top_k && *top_k < 1) throw Error("top_k must be positive");
    if (max_concurrent_requests < 1) throw Error("max_concurrent_requests must be positive");
    if (!(request_timeout > 0.0)) throw Error("request_timeout must be positive");
    if (max_retries < 0) throw Error("max_retries must be non-negative");
}

GenerationConfig default_generation_config(TaskKind kind) {
    GenerationConfig c;
    c.temperature = kind == TaskKind::ComponentGeneration ? 0.3 : 0.7;
    if (const char* key = std::getenv("MODIGEN_API_KEY")) c.api_key = key;
    return c;
}

// ---- JSON --------------------------------------------------------------------

namespace {

json parse_line(std::string_view line) {
    try {
        json j = json::parse(line);
        if (!j.is_object()) throw FormatError("JSON line is not an object");
        return j;
    } catch (const json::exception& e) {
        throw FormatError(std::string("invalid JSON line: ") + e.what());
    }
}

template <typename T>
T field(const json& j, const char* key) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw FormatError(std::string("missing or invalid field \"") + key + "\"");
    }
}

}  // namespace

std::string to_json_line(const BenchTask& t) {
    ojson j;
    j["id"] = t.id;
    j["kind"] = to_string(t.kind);
    j["prompt"] = t.prompt;
    j["dependencies"] = t.dependencies;
    if (t.reference_model) j["reference_model"] = *t.reference_model;
    if (t.reference_trajectories) j["reference_trajectories"] = *t.reference_trajectories;
    j["simulation_exempt"] = t.simulation_exempt;
    if (t.use_case_model) j["use_case_model"] = *t.use_case_model;
    if (t.simulation) {
        j["simulation"] = {{"stop_time", t.simulation->stop_time},
                           {"step", t.simulation->step},
                           {"tolerance", t.simulation->tolerance},
                           {"output_variables", t.simulation->output_variables}};
    }
    if (!t.compared_variables.empty()) j["compared_variables"] = t.compared_variables;
    return j.dump();
}

BenchTask bench_task_from_json(std::string_view line) {
    const json j = parse_line(line);
    BenchTask t;
    t.id = field<std::string>(j, "id");
    if (t.id.empty()) throw FormatError("task id must not be empty");
    t.kind = task_kind_from_string(j.value("kind", std::string("ComponentGeneration")));
    t.prompt = field<std::string>(j, "prompt");
    if (j.contains("dependencies")) t.dependencies = field<std::vector<std::string>>(j, "dependencies");
    if (j.contains("reference_model") && !j["reference_model"].is_null())
        t.reference_model = field<std::string>(j, "reference_model");
    if (j.contains("reference_trajectories") && !j["reference_trajectories"].is_null())
        t.reference_trajectories = field<std::string>(j, "reference_trajectories");
    t.simulation_exempt = j.value("simulation_exempt", false);
    if (j.contains("use_case_model") && !j["use_case_model"].is_null())
        t.use_case_model = field<std::string>(j, "use_case_model");
    if (j.contains("simulation")) {
        const json& s = j["simulation"];
        SimSettings st;
        st.stop_time = s.value("stop_time", st.stop_time);
        st.step = s.value("step", st.step);
        st.tolerance = s.value("tolerance", st.tolerance);
        if (s.contains("output_variables")) st.output_variables = s["output_variables"].get<std::vector<std::string>>();
        if (!(st.stop_time > 0) || !(st.step > 0)) throw FormatError("task " + t.id + ": stop_time and step must be positive");
        t.simulation = st;
    }
    if (j.contains("compared_variables")) t.compared_variables = field<std::vector<std::string>>(j, "compared_variables");
    return t;
}

std::string to_json_line(const Candidate& c) {
    ojson j;
    j["task_id"] = c.task_id;
    j["sample_index"] = c.sample_index;
    j["round"] = c.round;
    j["code"] = c.code;
    j["raw_response"] = c.raw_response;
    return j.dump();
}

Candidate candidate_from_json(std::string_view line) {
    const json j = parse_line(line);
    Candidate c;
    c.task_id = field<std::string>(j, "task_id");
    c.sample_index = field<int>(j, "sample_index");
    c.round = j.value("round", 0);
    c.code = field<std::string>(j, "code");
    c.raw_response = j.value("raw_response", std::string{});
    return c;
}

std::vector<BenchTask> read_bench(const std::filesystem::path& path) {
    std::vector<BenchTask> out;
    std::set<std::string> ids;
    std::size_t n = 0;
    for (const auto& line : read_jsonl_lines(path)) {
        ++n;
        try {
            out.push_back(bench_task_from_json(line));
        } catch (const FormatError& e) {
            throw FormatError(path.string() + ": task " + std::to_string(n) + ": " + e.what());
        }
        if (!ids.insert(out.back().id).second) throw FormatError(path.string() + ": duplicate task id '" + out.back().id + "'");
    }
    return out;
}

std::vector<Candidate> read_candidates(const std::filesystem::path& path) {
    std::vector<Candidate> out;
    for (const auto& line : read_jsonl_lines(path)) out.push_back(candidate_from_json(line));
    return out;
}

void write_candidates(const std::vector<Candidate>& candidates, const std::filesystem::path& path) {
    std::string text;
    for (const auto& c : candidates) text += to_json_line(c) + "\n";
    write_file_atomic(path, text);
}

// ---- prompts -----------------------------------------------------------------

std::string assemble_prompt(const BenchTask& task, const RetrievalResult* retrieval) {
    const bool has_snippets = retrieval != nullptr && !retrieval->snippets.empty();
    const bool inject_deps = task.kind == TaskKind::TestCaseGeneration && !task.dependencies.empty();
    if (!has_snippets && !inject_deps) return task.prompt;

    std::string out = "Reference context:\n";
    if (has_snippets) {
        for (const auto& s : retrieval->snippets) {
            out += "--- " + s.source_label + " ---\n";
            out += s.text;
            if (s.text.empty() || s.text.back() != '\n') out += '\n';
        }
    }
    if (inject_deps) {
        out += "Required libraries:";
        for (std::size_t i = 0; i < task.dependencies.size(); ++i)
            out += (i == 0 ? " " : ", ") + task.dependencies[i];
        out += '\n';
    }
    out += "End of reference context.\n\n";
    out += task.prompt;
    return out;
}

std::string chat_request_body(const ChatRequest& r) {
    ojson j;
    j["model"] = r.model;
    j["messages"] = ojson::array({ojson{{"role", "user"}, {"content", r.prompt}}});
    j["temperature"] = r.temperature;
    j["max_tokens"] = r.max_tokens;
    j["n"] = 1;
    if (r.top_k) j["top_k"] = *r.top_k;
    return j.dump();
}

std::string parse_chat_response(std::string_view body) {
    try {
        const json j = json::parse(body);
        const json& choice = j.at("choices").at(0);
        if (choice.contains("message")) return choice.at("message").at("content").get<std::string>();
        return choice.at("text").get<std::string>();
    } catch (const json::exception& e) {
        throw TransportError(std::string("unexpected response body: ") + e.what());
    }
}

// ---- transports --------------------------------------------------------------

namespace {

class HttpTransport final : public ChatTransport {
public:
    HttpTransport(const std::string& url, std::string api_key, double timeout) : api_key_(std::move(api_key)) {
        static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
        std::smatch m;
        if (!std::regex_match(url, m, re)) throw TransportError("invalid endpoint URL '" + url + "'");
        base_ = m[1];
        path_ = m[2].matched ? m[2].str() : std::string("/");
        timeout_ = timeout;
    }

    std::string complete(const ChatRequest& request) override {
        httplib::Client client(base_);
        const auto secs = static_cast<time_t>(timeout_);
        const auto usecs = static_cast<time_t>((timeout_ - static_cast<double>(secs)) * 1e6);
        client.set_connection_timeout(secs, usecs);
        client.set_read_timeout(secs, usecs);
        client.set_write_timeout(secs, usecs);
        httplib::Headers headers;
        if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
        auto res = client.Post(path_, headers, chat_request_body(request), "application/json");
        if (!res) throw TransportError("request to " + base_ + path_ + " failed: " + httplib::to_string(res.error()));
        if (res->status == 401 || res->status == 403)
            throw AuthError("endpoint rejected credentials (HTTP " + std::to_string(res->status) + ")");
        if (res->status < 200 || res->status >= 300)
            throw TransportError("endpoint returned HTTP " + std::to_string(res->status));
        return parse_chat_response(res->body);
    }

private:
    std::string base_;
    std::string path_;
    std::string api_key_;
    double timeout_ = 120.0;
};

class ScriptedTransport final : public ChatTransport {
public:
    explicit ScriptedTransport(const std::filesystem::path& path) : path_(path.string()) {
        for (const auto& line : read_jsonl_lines(path)) {
            json j;
            try {
                j = json::parse(line);
            } catch (const json::exception& e) {
                throw FormatError(path_ + ": invalid scripted response: " + e.what());
            }
            if (j.is_string()) j = json{{"content", j.get<std::string>()}};
            if (!j.is_object() || !(j.contains("content") || j.contains("status") || j.contains("error")))
                throw FormatError(path_ + ": scripted response needs content, status or error");
            lines_.push_back(std::move(j));
        }
    }

    std::string complete(const ChatRequest&) override {
        std::lock_guard<std::mutex> lock(mutex_);
        if (next_ >= lines_.size()) throw TransportError("scripted responses in " + path_ + " are exhausted");
        const json& j = lines_[next_++];
        if (j.contains("status")) {
            const int status = j["status"].get<int>();
            if (status == 401 || status == 403)
                throw AuthError("endpoint rejected credentials (HTTP " + std::to_string(status) + ")");
            if (status < 200 || status >= 300) throw TransportError("endpoint returned HTTP " + std::to_string(status));
        }
        if (j.contains("error")) throw TransportError(j["error"].get<std::string>());
        return j.value("content", std::string{});
    }

    int max_parallel() const override { return 1; }

private:
    std::string path_;
    std::vector<json> lines_;
    std::size_t next_ = 0;
    std::mutex mutex_;
};

}  // namespace

std::unique_ptr<ChatTransport> make_http_transport(const std::string& endpoint_url, const std::string& api_key,
                                                   double timeout_seconds) {
    return std::make_unique<HttpTransport>(endpoint_url, api_key, timeout_seconds);
}

std::unique_ptr<ChatTransport> make_scripted_transport(const std::filesystem::path& script) {
    return std::make_unique<ScriptedTransport>(script);
}

std::unique_ptr<ChatTransport> make_transport(const GenerationConfig& config) {
    constexpr std::string_view scheme = "file://";
    if (config.endpoint_url.rfind(scheme, 0) == 0)
        return make_scripted_transport(config.endpoint_url.substr(scheme.size()));
    return make_http_transport(config.endpoint_url, config.api_key, config.request_timeout);
}

// ---- sampling ----------------------------------------------------------------

std::vector<Candidate> sample(const GenerationConfig& config, ChatTransport& transport, const std::string& task_id,
                              const std::string& prompt, int round) {
    config.validate();
    ChatRequest request;
    request.model = config.model_name;
    request.prompt = prompt;
    request.temperature = config.temperature;
    request.max_tokens = config.max_tokens;
    if (config.endpoint_accepts_top_k) request.top_k = config.top_k;

    const auto n = static_cast<std::size_t>(config.n_samples);
    std::vector<Candidate> out(n);
    const auto workers = static_cast<std::size_t>(std::min(config.max_concurrent_requests, transport.max_parallel()));
    parallel_for(n, workers, [&](std::size_t, std::size_t i) {
        Candidate& c = out[i];
        c.task_id = task_id;
        c.sample_index = static_cast<int>(i);
        c.round = round;
        for (int attempt = 0;; ++attempt) {
            try {
                c.raw_response = transport.complete(request);
                c.code = extract_code(c.raw_response);
                return;
            } catch (const TransportError& e) {
                if (attempt >= config.max_retries) {
                    c.code.clear();
                    c.raw_response = std::string("transport error: ") + e.what();
                    return;
                }
                std::this_thread::sleep_for(std::chrono::duration<double>(config.retry_base_delay * (1 << attempt)));
            }
        }
    });
    return out;
}

std::vector<Candidate> sample(const GenerationConfig& config, const std::string& task_id, const std::string& prompt) {
    auto transport = make_transport(config);
    return sample(config, *transport, task_id, prompt);
}

// ---- code extraction ---------------------------------------------------------

namespace {

struct Line {
    std::size_t begin;
    std::size_t end;  // exclusive, before '\n'
};

std::vector<Line> split_lines(std::string_view text) {
    std::vector<Line> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t nl = text.find('\n', start);
        if (nl == std::string_view::npos) nl = text.size();
        lines.push_back({start, nl});
        if (nl == text.size()) break;
        start = nl + 1;
    }
    return lines;
}

std::string_view trim_view(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::optional<std::string> fenced_block(std::string_view text, const std::vector<Line>& lines) {
    struct Block {
        std::string info;
        std::string body;
    };
    std::vector<Block> blocks;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::string_view l = trim_view(text.substr(lines[i].begin, lines[i].end - lines[i].begin));
        if (l.rfind("```", 0) != 0) continue;
        Block b;
        b.info = lower(trim_view(l.substr(3)));
        std::size_t j = i + 1;
        std::string body;
        for (; j < lines.size(); ++j) {
            const std::string_view raw = text.substr(lines[j].begin, lines[j].end - lines[j].begin);
            if (trim_view(raw).rfind("```", 0) == 0) break;
            if (j > i + 1) body += '\n';
            body += raw;
        }
        while (!body.empty() && (body.back() == '\n' || body.back() == '\r' || body.back() == ' ')) body.pop_back();
        b.body = std::move(body);
        blocks.push_back(std::move(b));
        i = j;
    }
    if (blocks.empty()) return std::nullopt;
    for (const auto& b : blocks)
        if (b.info.empty() || b.info == "modelica") return b.body;
    return blocks.front().body;
}

}  // namespace

std::string extract_code(std::string_view response) {
    const auto lines = split_lines(response);
    if (auto block = fenced_block(response, lines)) return *block;

    static const std::regex header(R"(^(model|block|function|connector|class|record|partial)\b)");
    std::string best;
    for (const auto& l : lines) {
        std::size_t start = l.begin;
        while (start < l.end && (response[start] == ' ' || response[start] == '\t')) ++start;
        const std::string line(response.substr(start, l.end - start));
        if (!std::regex_search(line, header)) continue;
        const std::string_view rest = response.substr(start);
        const std::string name = first_class_name(rest);
        if (name.empty()) continue;
        const std::regex closing("\\bend\\s+" + name + "\\s*;");
        std::size_t stop = std::string::npos;
        const std::string rest_str(rest);
        for (auto it = std::sregex_iterator(rest_str.begin(), rest_str.end(), closing); it != std::sregex_iterator(); ++it)
            stop = static_cast<std::size_t>(it->position() + it->length());
        if (stop == std::string::npos) continue;
        if (stop > best.size()) best = rest_str.substr(0, stop);
    }
    if (!best.empty()) return best;
    return std::string(response);
}

}  // namespace modigen
