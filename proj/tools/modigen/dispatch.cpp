// SPDX-License-Identifier: Apache-2.0
#include "dispatch.hpp"

#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "commands.hpp"
#include "manifest.hpp"
#include "modigen/error.hpp"

#ifndef MODIGEN_VERSION
#define MODIGEN_VERSION "0.0.0"
#endif

namespace modigen::cli {
namespace {

void install_logger(std::ostream& err, const std::string& level) {
    auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err, true);
    auto logger = std::make_shared<spdlog::logger>("modigen", sink);
    logger->set_pattern("modigen: %l: %v");
    logger->set_level(spdlog::level::from_str(level));
    spdlog::set_default_logger(logger);
}

std::string join(const std::vector<std::string>& parts) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? "," : "") + parts[i];
    return out;
}

void collect_flags(const CLI::App* app, const std::string& prefix, std::map<std::string, std::string>& flags) {
    for (const CLI::Option* opt : app->get_options()) {
        if (opt->get_name() == "--help" || opt->get_name() == "-h") continue;
        std::string name = opt->get_single_name();
        if (!prefix.empty()) name = prefix + "." + name;
        if (opt->count() > 0)
            flags[name] = opt->get_type_size() == 0 && opt->results().empty() ? "true" : join(opt->results());
        else if (!opt->get_default_str().empty())
            flags[name] = opt->get_default_str();
    }
}

const CLI::App* deepest_parsed(const CLI::App* app) {
    for (const CLI::App* sub : app->get_subcommands()) return deepest_parsed(sub);
    return app;
}

std::string subcommand_path(const CLI::App* app) {
    std::string path;
    for (const CLI::App* cur = app; !cur->get_subcommands().empty();) {
        cur = cur->get_subcommands().front();
        path += (path.empty() ? "" : " ") + cur->get_name();
    }
    return path;
}

}  // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Modelica code generation and validation workflow", "modigen"};
    app.set_version_flag("--version", std::string(MODIGEN_VERSION));
    app.require_subcommand(1);
    app.fallthrough();

    std::string log_level = "info";
    std::optional<std::string> manifest_out;
    app.add_option("--log-level", log_level, "trace, debug, info, warn, error, critical or off")
        ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "critical", "off"}))
        ->capture_default_str();
    app.add_option("--manifest-out", manifest_out, "Write a run manifest to this path");

    std::function<void()> action;
    std::vector<fs::path> inputs;
    std::optional<fs::path> default_manifest;

    // preprocess
    PreprocessOptions pre;
    std::size_t max_chars = pre.policy.max_model_chars;
    bool strict_missing = false;
    auto* sp = app.add_subcommand("preprocess", "Build Dataset_all (and optionally Dataset_sft) from a library");
    sp->add_option("--lib-root", pre.lib_root, "Library root directory")->required();
    sp->add_option("--lib-name", pre.lib_name, "Library name")->required();
    sp->add_option("--modelica-version", pre.modelica_version, "Modelica version of the library")->required();
    sp->add_option("--out", pre.out, "Dataset_all JSONL output")->required();
    sp->add_option("--sft-out", pre.sft_out, "Dataset_sft JSONL output");
    sp->add_option("--instruction-template", pre.instruction_template, "Instruction template file");
    sp->add_option("--query-template", pre.query_template, "Query template file");
    sp->add_option("--max-model-chars", max_chars, "Reject models longer than this")->capture_default_str();
    sp->add_flag("--reject-any-missing", strict_missing, "Reject when either description or documentation is empty");
    sp->add_option("--reject-log", pre.reject_log, "Rejection log JSONL output");
    sp->add_option("--workers", pre.workers, "Parser threads")->capture_default_str();
    sp->callback([&] {
        pre.policy.max_model_chars = max_chars;
        pre.policy.reject_any_missing = strict_missing;
        if (pre.instruction_template) inputs.push_back(*pre.instruction_template);
        if (pre.query_template) inputs.push_back(*pre.query_template);
        default_manifest = pre.out.string() + ".manifest.json";
        action = [&] {
            const auto summary = run_preprocess(pre);
            inputs.insert(inputs.end(), summary.files.begin(), summary.files.end());
        };
    });

    // graph build / graph query
    auto* sg = app.add_subcommand("graph", "Build or query the property graph index");
    sg->require_subcommand(1);
    fs::path g_corpus, g_out, g_index;
    std::string g_query;
    RetrievalOptions g_opts;
    auto* sgb = sg->add_subcommand("build", "Build a graph index from Dataset_all");
    sgb->add_option("--corpus", g_corpus, "Dataset_all JSONL")->required();
    sgb->add_option("--out", g_out, "Graph JSON output")->required();
    sgb->callback([&] {
        inputs.push_back(g_corpus);
        default_manifest = g_out.string() + ".manifest.json";
        action = [&] { run_graph_build(g_corpus, g_out); };
    });
    auto* sgq = sg->add_subcommand("query", "Print retrieval snippets for a query as JSONL");
    sgq->add_option("--index", g_index, "Graph JSON")->required();
    sgq->add_option("--query", g_query, "Query text")->required();
    sgq->add_option("--hops", g_opts.hops, "Neighbourhood radius")->capture_default_str();
    sgq->add_option("--budget", g_opts.char_budget, "Character budget")->capture_default_str();
    sgq->add_option("--seeds", g_opts.seeds, "Number of seed nodes")->capture_default_str();
    sgq->callback([&] {
        inputs.push_back(g_index);
        action = [&] { run_graph_query(g_index, g_query, g_opts, out); };
    });

    // generate
    GenerateOptions gen;
    std::string gen_task;
    std::optional<double> gen_temperature;
    std::optional<int> gen_top_k;
    int gen_n = 0;
    bool gen_accepts_top_k = false;
    int gen_max_tokens = 2048, gen_concurrency = 4, gen_retries = 3;
    double gen_timeout = 120.0;
    auto* sgen = app.add_subcommand("generate", "Sample candidates for each bench task");
    sgen->add_option("--task", gen_task, "component or testcase")
        ->required()
        ->check(CLI::IsMember({"component", "testcase"}));
    sgen->add_option("--bench", gen.bench, "Bench JSONL")->required();
    sgen->add_option("--n", gen_n, "Samples per task (default: the task kind's k)");
    sgen->add_option("--temperature", gen_temperature, "Sampling temperature (default 0.3 / 0.7)");
    sgen->add_option("--top-k", gen_top_k, "top_k, sent only with --endpoint-accepts-top-k");
    sgen->add_flag("--endpoint-accepts-top-k", gen_accepts_top_k, "The endpoint accepts a top_k field");
    sgen->add_option("--endpoint", gen.config.endpoint_url, "Chat-completions URL or file://script.jsonl")
        ->required();
    sgen->add_option("--model", gen.config.model_name, "Model name")->required();
    sgen->add_option("--max-tokens", gen_max_tokens)->capture_default_str();
    sgen->add_option("--max-concurrent-requests", gen_concurrency)->capture_default_str();
    sgen->add_option("--max-retries", gen_retries)->capture_default_str();
    sgen->add_option("--request-timeout", gen_timeout, "Seconds")->capture_default_str();
    sgen->add_option("--graph", gen.graph, "Graph index for retrieval");
    sgen->add_option("--hops", gen.retrieval.hops)->capture_default_str();
    sgen->add_option("--budget", gen.retrieval.char_budget)->capture_default_str();
    sgen->add_option("--out", gen.out, "Candidates JSONL output")->required();
    sgen->callback([&] {
        gen.kind = task_kind_from_string(gen_task);
        GenerationConfig base = default_generation_config(gen.kind);
        base.endpoint_url = gen.config.endpoint_url;
        base.model_name = gen.config.model_name;
        base.n_samples = gen_n > 0 ? gen_n : default_scenario(gen.kind);
        if (gen_temperature) base.temperature = *gen_temperature;
        base.top_k = gen_top_k;
        base.endpoint_accepts_top_k = gen_accepts_top_k;
        base.max_tokens = gen_max_tokens;
        base.max_concurrent_requests = gen_concurrency;
        base.max_retries = gen_retries;
        base.request_timeout = gen_timeout;
        gen.config = base;
        inputs.push_back(gen.bench);
        if (gen.graph) inputs.push_back(*gen.graph);
        default_manifest = gen.out.string() + ".manifest.json";
        action = [&] { run_generate(gen); };
    });

    auto add_backend = [](CLI::App* sub, BackendOptions& b) {
        sub->add_option("--backend", b.kind, "omc, mock or micro")
            ->required()
            ->check(CLI::IsMember({"omc", "mock", "micro"}));
        auto* omc = sub->add_option("--omc-path", b.omc_path, "omc executable");
        auto* fix = sub->add_option("--fixture", b.fixture, "Mock backend fixture JSON");
        omc->excludes(fix);
        sub->add_option("--request-timeout", b.request_timeout, "Per-request timeout in seconds (omc)")
            ->capture_default_str();
    };

    // validate
    ValidateOptions val;
    auto* sv = app.add_subcommand("validate", "Run Load, Check, Simulate and Functional validation");
    sv->add_option("--candidates", val.candidates, "Candidates JSONL")->required();
    sv->add_option("--bench", val.bench, "Bench JSONL")->required();
    add_backend(sv, val.backend);
    sv->add_option("--refs", val.refs, "Directory of reference trajectory CSVs");
    sv->add_option("--workers", val.workers, "Backend sessions")->capture_default_str();
    sv->add_flag("--timings", val.timings, "Record per-stage elapsed time");
    sv->add_option("--out", val.out, "Reports JSONL output")->required();
    sv->callback([&] {
        inputs.insert(inputs.end(), {val.candidates, val.bench});
        if (val.backend.fixture) inputs.push_back(*val.backend.fixture);
        default_manifest = val.out.string() + ".manifest.json";
        action = [&] { run_validate(val); };
    });

    // repair
    RepairOptions rep;
    std::optional<double> rep_temperature;
    bool rep_no_code = false;
    auto* sr = app.add_subcommand("repair", "Feed validation errors back to the model and revalidate");
    sr->add_option("--candidates", rep.candidates, "Candidates JSONL")->required();
    sr->add_option("--reports", rep.reports, "Reports JSONL for the candidates")->required();
    sr->add_option("--bench", rep.bench, "Bench JSONL")->required();
    add_backend(sr, rep.backend);
    sr->add_option("--refs", rep.refs, "Directory of reference trajectory CSVs");
    sr->add_option("--endpoint", rep.config.endpoint_url, "Chat-completions URL or file://script.jsonl")->required();
    sr->add_option("--model", rep.config.model_name, "Model name")->required();
    sr->add_option("--temperature", rep_temperature, "Sampling temperature (default: per task kind)");
    sr->add_option("--rounds", rep.rounds, "Repair rounds")->capture_default_str()->check(CLI::NonNegativeNumber);
    sr->add_flag("--no-failed-code", rep_no_code, "Leave the failed code out of the repair prompt");
    sr->add_option("--workers", rep.workers, "Backend sessions")->capture_default_str();
    sr->add_option("--out", rep.out, "Final candidates JSONL output")->required();
    sr->add_option("--attempts-out", rep.attempts_out, "Repair attempts JSONL output");
    sr->add_option("--reports-out", rep.reports_out, "Final reports JSONL output");
    sr->callback([&] {
        GenerationConfig base = default_generation_config(TaskKind::ComponentGeneration);
        base.endpoint_url = rep.config.endpoint_url;
        base.model_name = rep.config.model_name;
        rep.config = base;
        rep.temperature = rep_temperature;
        rep.include_failed_code = !rep_no_code;
        inputs.insert(inputs.end(), {rep.candidates, rep.reports, rep.bench});
        if (rep.backend.fixture) inputs.push_back(*rep.backend.fixture);
        default_manifest = rep.out.string() + ".manifest.json";
        action = [&] { run_repair(rep); };
    });

    // evaluate
    EvaluateOptions ev;
    std::string ev_format = "csv";
    auto* se = app.add_subcommand("evaluate", "Compute pass@k metrics from reports");
    se->add_option("--reports", ev.reports, "Reports JSONL")->required();
    se->add_option("--scenario", ev.scenario, "k for pass@k")->capture_default_str()->check(CLI::PositiveNumber);
    se->add_flag("--per-task", ev.per_task, "Add one row per task");
    se->add_option("--format", ev_format, "csv or markdown")
        ->capture_default_str()
        ->check(CLI::IsMember({"csv", "markdown"}));
    se->add_option("--out", ev.out, "Output file (default: stdout)");
    se->callback([&] {
        ev.format = ev_format == "markdown" ? ReportFormat::Markdown : ReportFormat::Csv;
        inputs.push_back(ev.reports);
        if (ev.out) default_manifest = ev.out->string() + ".manifest.json";
        action = [&] { run_evaluate(ev, out); };
    });

    // pipeline
    fs::path pipe_config;
    auto* spl = app.add_subcommand("pipeline", "Run generate, validate, repair and evaluate from a JSON config");
    spl->add_option("--config", pipe_config, "Pipeline config JSON")->required();
    spl->callback([&] {
        inputs.push_back(pipe_config);
        action = [&] {
            const auto written = run_pipeline_config(pipe_config, inputs);
            if (!written.empty()) default_manifest = written.front().parent_path() / "manifest.json";
        };
    });

    if (argc <= 1) {
        err << app.help();
        return 2;
    }

    RunManifest manifest;
    manifest.tool_version = MODIGEN_VERSION;
    manifest.started = utc_timestamp();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << deepest_parsed(&app)->help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << MODIGEN_VERSION << '\n';
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "modigen: " << e.what() << "\n\n" << deepest_parsed(&app)->help();
        return 2;
    }

    install_logger(err, log_level);
    manifest.subcommand = subcommand_path(&app);
    collect_flags(&app, "", manifest.flags);
    for (const CLI::App* cur = &app; !cur->get_subcommands().empty();) {
        cur = cur->get_subcommands().front();
        collect_flags(cur, "", manifest.flags);
    }

    int code = 0;
    try {
        action();
    } catch (const CommandError& e) {
        spdlog::error("{}", e.what());
        code = 1;
    } catch (const Error& e) {
        spdlog::error("{}", e.what());
        code = 1;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        code = 1;
    }

    for (const auto& p : inputs) {
        try {
            manifest.input_digests[p.string()] = sha256_file(p);
        } catch (const Error&) {
            manifest.input_digests[p.string()] = "missing";
        }
    }
    manifest.exit_code = code;
    manifest.finished = utc_timestamp();
    const std::optional<fs::path> dest = manifest_out ? std::optional<fs::path>(*manifest_out) : default_manifest;
    if (dest) {
        try {
            write_manifest(manifest, *dest);
        } catch (const Error& e) {
            spdlog::error("cannot write manifest: {}", e.what());
            if (code == 0) code = 1;
        }
    }
    return code;
}

}  // namespace modigen::cli
