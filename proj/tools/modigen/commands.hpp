// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "modigen/corpus.hpp"
#include "modigen/genclient.hpp"
#include "modigen/metrics.hpp"
#include "modigen/simbackend.hpp"

namespace modigen::cli {

namespace fs = std::filesystem;

/// Operational failure with a message for stderr; maps to exit code 1.
struct CommandError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PreprocessOptions {
    fs::path lib_root;
    std::string lib_name;
    std::string modelica_version;
    fs::path out;
    std::optional<fs::path> sft_out;
    std::optional<fs::path> instruction_template;
    std::optional<fs::path> query_template;
    std::optional<fs::path> reject_log;
    FilterPolicy policy;
    std::size_t workers = 1;
};

struct PreprocessSummary {
    std::vector<fs::path> files;  // scanned units, for the manifest
    std::size_t units = 0;
    std::size_t records = 0;
    std::size_t kept = 0;
    RejectionLog rejections;
};

PreprocessSummary run_preprocess(const PreprocessOptions& o);

void run_graph_build(const fs::path& corpus, const fs::path& out);
void run_graph_query(const fs::path& index, const std::string& query, const RetrievalOptions& options,
                     std::ostream& out);

struct GenerateOptions {
    TaskKind kind = TaskKind::ComponentGeneration;
    fs::path bench;
    GenerationConfig config;
    std::optional<fs::path> graph;
    RetrievalOptions retrieval;
    fs::path out;
    ChatTransport* transport = nullptr;  // default: make_transport(config)
};

std::vector<Candidate> run_generate(const GenerateOptions& o);

struct BackendOptions {
    std::string kind = "micro";  // omc | mock | micro
    std::string omc_path = "omc";
    std::optional<fs::path> fixture;
    double request_timeout = 120.0;
};

BackendFactory make_backend_factory(const BackendOptions& o);

struct ValidateOptions {
    fs::path candidates;
    fs::path bench;
    BackendOptions backend;
    std::optional<fs::path> refs;
    std::size_t workers = 1;
    bool timings = false;
    fs::path out;
};

std::vector<ValidationReport> run_validate(const ValidateOptions& o);

struct RepairOptions {
    fs::path candidates;
    fs::path reports;
    fs::path bench;
    BackendOptions backend;
    std::optional<fs::path> refs;
    GenerationConfig config;
    std::optional<double> temperature;  // default: per task kind
    int rounds = 1;
    bool include_failed_code = true;
    std::size_t workers = 1;
    fs::path out;
    std::optional<fs::path> attempts_out;
    std::optional<fs::path> reports_out;
    ChatTransport* transport = nullptr;
};

struct RepairSummary {
    std::vector<Candidate> final_candidates;
    std::vector<ValidationReport> final_reports;
    std::size_t attempts = 0;
};

RepairSummary run_repair(const RepairOptions& o);

struct EvaluateOptions {
    fs::path reports;
    int scenario = 8;
    bool per_task = false;
    ReportFormat format = ReportFormat::Csv;
    std::optional<fs::path> out;
};

MetricsReport run_evaluate(const EvaluateOptions& o, std::ostream& out);

/// Runs generate, validate, repair and evaluate from one JSON config. Returns the
/// files written, for the manifest.
std::vector<fs::path> run_pipeline_config(const fs::path& config, std::vector<fs::path>& inputs);

}  // namespace modigen::cli
