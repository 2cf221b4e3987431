// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "modigen/graph.hpp"
#include "modigen/simbackend.hpp"

namespace modigen {

enum class TaskKind { ComponentGeneration, TestCaseGeneration };

std::string_view to_string(TaskKind kind);
/// Accepts "ComponentGeneration"/"component" and "TestCaseGeneration"/"testcase".
TaskKind task_kind_from_string(std::string_view s);

/// 8 for component generation, 5 for test-case generation.
int default_scenario(TaskKind kind);

struct GenerationConfig {
    double temperature = 0.3;
    std::optional<int> top_k;
    bool endpoint_accepts_top_k = false;  // top_k is only sent when this is set
    int n_samples = 1;
    int max_tokens = 2048;
    std::string model_name;
    std::string endpoint_url;
    double request_timeout = 120.0;
    int max_concurrent_requests = 4;
    int max_retries = 3;
    double retry_base_delay = 1.0;  // seconds; retry i waits base * 2^i
    std::string api_key;            // defaults to $MODIGEN_API_KEY

    /// Throws Error when a field is out of range.
    void validate() const;
};

/// Defaults for a task kind: temperature 0.3 / 0.7, api_key from the environment.
GenerationConfig default_generation_config(TaskKind kind);

struct BenchTask {
    std::string id;
    TaskKind kind = TaskKind::ComponentGeneration;
    std::string prompt;
    std::vector<std::string> dependencies;
    std::optional<std::string> reference_model;
    std::optional<std::string> reference_trajectories;  // CSV path, relative to the refs directory
    bool simulation_exempt = false;
    std::optional<std::string> use_case_model;  // simulated instead of an exempt candidate
    std::optional<SimSettings> simulation;
    std::vector<std::string> compared_variables;  // empty: intersection
};

struct Candidate {
    std::string task_id;
    int sample_index = 0;
    std::string code;
    std::string raw_response;
    int round = 0;

    bool operator==(const Candidate&) const = default;
};

std::string to_json_line(const BenchTask& task);
std::string to_json_line(const Candidate& candidate);
BenchTask bench_task_from_json(std::string_view line);
Candidate candidate_from_json(std::string_view line);

/// Throws FormatError on malformed lines or duplicate task ids.
std::vector<BenchTask> read_bench(const std::filesystem::path& path);
std::vector<Candidate> read_candidates(const std::filesystem::path& path);
void write_candidates(const std::vector<Candidate>& candidates, const std::filesystem::path& path);

/// The prompt, preceded by a "Reference context:" section when there are retrieval
/// snippets or (for test-case tasks) dependencies to inject. Otherwise the prompt itself.
std::string assemble_prompt(const BenchTask& task, const RetrievalResult* retrieval = nullptr);

struct ChatRequest {
    std::string model;
    std::string prompt;
    double temperature = 0.3;
    int max_tokens = 2048;
    std::optional<int> top_k;
};

/// Request body: {model, messages:[{role:"user", content}], temperature, max_tokens, n:1[, top_k]}.
std::string chat_request_body(const ChatRequest& request);

/// Returns the message content of a chat-completions response body. Throws TransportError.
std::string parse_chat_response(std::string_view body);

class ChatTransport {
public:
    virtual ~ChatTransport() = default;
    /// Returns the completion text. Throws AuthError (not retried) or TransportError.
    virtual std::string complete(const ChatRequest& request) = 0;
    /// Upper bound on concurrent calls this transport tolerates.
    virtual int max_parallel() const { return 1 << 20; }
};

/// POSTs to a chat-completions endpoint with a bearer token.
std::unique_ptr<ChatTransport> make_http_transport(const std::string& endpoint_url, const std::string& api_key,
                                                   double timeout_seconds);

/// Replays a JSONL script in order. Each line is {"content": "..."}, {"status": 401}
/// or {"error": "..."}. Running past the end is a TransportError.
std::unique_ptr<ChatTransport> make_scripted_transport(const std::filesystem::path& script);

/// file://PATH selects the scripted transport, anything else HTTP.
std::unique_ptr<ChatTransport> make_transport(const GenerationConfig& config);

/// Issues n_samples independent requests, retrying transport failures with exponential
/// backoff; a sample whose retries are exhausted gets empty code and the error as its
/// raw response. AuthError propagates. Candidates are ordered by sample_index.
std::vector<Candidate> sample(const GenerationConfig& config, ChatTransport& transport, const std::string& task_id,
                              const std::string& prompt, int round = 0);

std::vector<Candidate> sample(const GenerationConfig& config, const std::string& task_id, const std::string& prompt);

/// Modelica code from an LLM response: the first ``` block tagged modelica or untagged
/// (else the first block), else the longest class text from a header line to its
/// matching `end Name;`, else the input unchanged.
std::string extract_code(std::string_view response);

}  // namespace modigen
