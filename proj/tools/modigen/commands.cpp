// SPDX-License-Identifier: Apache-2.0
#include "commands.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <map>
#include <memory>
#include <sstream>
#include <utility>

#include "json.hpp"
#include "modigen/error.hpp"
#include "modigen/feedback.hpp"
#include "modigen/io.hpp"
#include "modigen/parallel.hpp"
#include "modigen/validate.hpp"

namespace modigen::cli {
namespace {

using json = nlohmann::json;

std::string read_optional(const std::optional<fs::path>& p, std::string fallback) {
    return p ? read_file(*p) : std::move(fallback);
}

std::map<std::string, BenchTask> index_tasks(const std::vector<BenchTask>& tasks) {
    std::map<std::string, BenchTask> out;
    for (const auto& t : tasks) out.emplace(t.id, t);
    return out;
}

std::map<std::string, FunctionalSpec> specs_for(const std::vector<BenchTask>& tasks,
                                                const std::optional<fs::path>& refs) {
    if (!refs) return {};
    return load_reference_specs(tasks, *refs);
}

}  // namespace

PreprocessSummary run_preprocess(const PreprocessOptions& o) {
    if (o.sft_out && (!o.instruction_template || !o.query_template))
        throw CommandError("--sft-out requires --instruction-template and --query-template");

    PreprocessSummary s;
    ScanResult scan = scan_library(o.lib_root, o.lib_name, o.modelica_version);
    for (const auto& issue : scan.issues) spdlog::warn("skipping {}: {}", issue.path, issue.message);
    s.units = scan.units.size();
    for (const auto& u : scan.units) s.files.push_back(u.path);

    auto [records, parse_log] = build_records(scan.units, o.workers);
    s.records = records.size();
    auto [filtered, filter_log] = filter_records(records, o.policy);
    auto [kept, dup_log] = dedupe(filtered);
    s.kept = kept.size();

    s.rejections = std::move(parse_log);
    s.rejections.insert(s.rejections.end(), filter_log.begin(), filter_log.end());
    s.rejections.insert(s.rejections.end(), dup_log.begin(), dup_log.end());

    // Validate everything before writing anything.
    std::vector<SftRecord> sft;
    if (o.sft_out) sft = build_sft_records(kept, read_file(*o.instruction_template), read_file(*o.query_template));

    emit_jsonl(kept, o.out);
    if (o.sft_out) emit_jsonl(sft, *o.sft_out);
    if (o.reject_log) emit_rejections(s.rejections, *o.reject_log);
    spdlog::info("preprocess: {} units, {} records, {} kept, {} rejected", s.units, s.records, s.kept,
                 s.rejections.size());
    return s;
}

void run_graph_build(const fs::path& corpus, const fs::path& out) {
    const auto records = read_corpus(corpus);
    const PropertyGraph g = build_graph(components_from_corpus(records), records);
    save_graph(g, out);
    spdlog::info("graph: {} nodes, {} edges", g.nodes.size(), g.edges.size());
}

void run_graph_query(const fs::path& index, const std::string& query, const RetrievalOptions& options,
                     std::ostream& out) {
    const PropertyGraph g = load_graph(index);
    const RetrievalResult r = retrieve(g, query, options);
    for (const auto& s : r.snippets) {
        nlohmann::ordered_json j;
        j["score"] = s.score;
        j["source_label"] = s.source_label;
        j["text"] = s.text;
        out << j.dump() << '\n';
    }
}

std::vector<Candidate> run_generate(const GenerateOptions& o) {
    o.config.validate();
    const auto tasks = read_bench(o.bench);
    std::optional<PropertyGraph> graph;
    if (o.graph) graph = load_graph(*o.graph);
    std::unique_ptr<ChatTransport> owned;
    ChatTransport* transport = o.transport;
    if (transport == nullptr) transport = (owned = make_transport(o.config)).get();

    std::vector<Candidate> all;
    for (const auto& task : tasks) {
        if (task.kind != o.kind) continue;
        std::string prompt;
        if (graph) {
            const RetrievalResult r = retrieve(*graph, task.prompt, o.retrieval);
            prompt = assemble_prompt(task, &r);
        } else {
            prompt = assemble_prompt(task);
        }
        auto produced = sample(o.config, *transport, task.id, prompt);
        for (auto& c : produced) all.push_back(std::move(c));
    }
    write_candidates(all, o.out);
    spdlog::info("generate: {} candidates", all.size());
    return all;
}

BackendFactory make_backend_factory(const BackendOptions& o) {
    if (o.kind == "micro") return [] { return make_micro_backend(); };
    if (o.kind == "mock") {
        if (!o.fixture) throw CommandError("--backend mock requires --fixture");
        const std::string fixture = read_file(*o.fixture);
        make_mock_backend_from_json(fixture);  // fail early on a malformed fixture
        return [fixture] { return make_mock_backend_from_json(fixture); };
    }
    if (o.kind == "omc") {
        OmcOptions opts;
        opts.executable = o.omc_path;
        opts.request_timeout = o.request_timeout;
        if (!find_executable(opts.executable)) throw SpawnError("cannot find executable '" + opts.executable + "'");
        return [opts] { return make_omc_backend(opts); };
    }
    throw CommandError("unknown backend '" + o.kind + "'");
}

std::vector<ValidationReport> run_validate(const ValidateOptions& o) {
    const auto candidates = read_candidates(o.candidates);
    const auto tasks = read_bench(o.bench);
    const auto factory = make_backend_factory(o.backend);
    const auto reports = validate_batch(candidates, tasks, factory, specs_for(tasks, o.refs), o.workers);
    write_reports(reports, o.out, o.timings);
    const auto passed = std::count_if(reports.begin(), reports.end(), [](const auto& r) { return r.pass_f; });
    spdlog::info("validate: {} reports, {} pass_f", reports.size(), passed);
    return reports;
}

RepairSummary run_repair(const RepairOptions& o) {
    const auto candidates = read_candidates(o.candidates);
    const auto reports = read_reports(o.reports);
    const auto tasks = read_bench(o.bench);
    const auto by_id = index_tasks(tasks);
    const auto specs = specs_for(tasks, o.refs);
    const auto factory = make_backend_factory(o.backend);
    std::unique_ptr<ChatTransport> owned;
    ChatTransport* transport = o.transport;
    if (transport == nullptr) transport = (owned = make_transport(o.config)).get();

    std::map<std::pair<std::string, int>, const ValidationReport*> report_of;
    for (const auto& r : reports) {
        auto& slot = report_of[{r.task_id, r.sample_index}];
        if (slot == nullptr || slot->round <= r.round) slot = &r;
    }

    FeedbackConfig fb;
    fb.max_rounds = o.rounds;
    fb.include_failed_code = o.include_failed_code;

    const std::size_t n = candidates.size();
    std::vector<RepairOutcome> outcomes(n);
    std::size_t workers = std::max<std::size_t>(1, o.workers);
    if (transport->max_parallel() <= 1) workers = 1;  // scripted replies must be consumed in order
    std::vector<std::unique_ptr<BackendSession>> sessions(workers);

    parallel_for(n, workers, [&](std::size_t w, std::size_t i) {
        const Candidate& c = candidates[i];
        auto task = by_id.find(c.task_id);
        if (task == by_id.end()) throw CommandError("candidate names unknown task '" + c.task_id + "'");
        GenerationConfig gen = o.config;
        gen.temperature = o.temperature.value_or(default_generation_config(task->second.kind).temperature);
        const auto spec_it = specs.find(c.task_id);
        const FunctionalSpec* spec = spec_it == specs.end() ? nullptr : &spec_it->second;
        const auto rep_it = report_of.find({c.task_id, c.sample_index});
        const ValidationReport* initial = rep_it == report_of.end() ? nullptr : rep_it->second;

        if (!sessions[w] || !sessions[w]->alive()) sessions[w] = factory();
        outcomes[i] = repair_loop(task->second, c, initial, *sessions[w], gen, *transport, fb, spec);
    });
    for (auto& s : sessions)
        if (s) s->dispose();

    RepairSummary out;
    std::vector<RepairAttempt> attempts;
    for (auto& oc : outcomes) {
        out.final_candidates.push_back(oc.final_candidate);
        out.final_reports.push_back(oc.final_report);
        for (auto& a : oc.attempts) attempts.push_back(std::move(a));
    }
    out.attempts = attempts.size();

    write_candidates(out.final_candidates, o.out);
    if (o.attempts_out) write_attempts(attempts, *o.attempts_out);
    if (o.reports_out) write_reports(out.final_reports, *o.reports_out);
    spdlog::info("repair: {} candidates, {} attempts", n, out.attempts);
    return out;
}

MetricsReport run_evaluate(const EvaluateOptions& o, std::ostream& out) {
    const auto reports = read_reports(o.reports);
    const MetricsReport m = aggregate(task_results(reports), o.scenario);
    for (const auto& id : m.excluded) spdlog::warn("task '{}' has fewer than {} samples; excluded", id, o.scenario);
    const std::string text = render_report(m, o.format, o.per_task);
    if (o.out)
        write_file_atomic(*o.out, text);
    else
        out << text;
    return m;
}

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    return j.contains(key) && !j[key].is_null() ? j[key].get<T>() : fallback;
}

}  // namespace

std::vector<fs::path> run_pipeline_config(const fs::path& config_path, std::vector<fs::path>& inputs) {
    json cfg;
    try {
        cfg = json::parse(read_file(config_path));
    } catch (const json::exception& e) {
        throw FormatError(config_path.string() + ": " + e.what());
    }
    if (!cfg.is_object()) throw FormatError(config_path.string() + ": expected a JSON object");
    const fs::path base = config_path.parent_path().empty() ? fs::path(".") : config_path.parent_path();

    static const std::vector<std::string> known = {
        "task", "bench", "endpoint", "model", "n", "temperature", "top_k", "endpoint_accepts_top_k",
        "max_tokens", "max_concurrent_requests", "max_retries", "retry_base_delay", "request_timeout",
        "graph", "hops", "budget", "backend", "fixture", "omc_path", "refs", "workers", "rounds",
        "include_failed_code", "scenario", "per_task", "out_dir"};
    for (const auto& [key, value] : cfg.items())
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw FormatError(config_path.string() + ": unknown key '" + key + "'");
    for (const char* key : {"bench", "endpoint", "out_dir"})
        if (!cfg.contains(key)) throw FormatError(config_path.string() + ": missing key '" + std::string(key) + "'");

    const TaskKind kind = task_kind_from_string(get_or<std::string>(cfg, "task", "component"));
    const fs::path out_dir = resolve(base, cfg["out_dir"].get<std::string>());

    GenerationConfig gen = default_generation_config(kind);
    std::string endpoint = cfg["endpoint"].get<std::string>();
    if (endpoint.rfind("file://", 0) == 0) {
        const fs::path script = resolve(base, endpoint.substr(7));
        inputs.push_back(script);
        endpoint = "file://" + script.string();
    }
    gen.endpoint_url = endpoint;
    gen.model_name = get_or<std::string>(cfg, "model", "");
    gen.n_samples = get_or<int>(cfg, "n", default_scenario(kind));
    gen.temperature = get_or<double>(cfg, "temperature", gen.temperature);
    if (cfg.contains("top_k")) gen.top_k = cfg["top_k"].get<int>();
    gen.endpoint_accepts_top_k = get_or<bool>(cfg, "endpoint_accepts_top_k", false);
    gen.max_tokens = get_or<int>(cfg, "max_tokens", gen.max_tokens);
    gen.max_concurrent_requests = get_or<int>(cfg, "max_concurrent_requests", gen.max_concurrent_requests);
    gen.max_retries = get_or<int>(cfg, "max_retries", gen.max_retries);
    gen.retry_base_delay = get_or<double>(cfg, "retry_base_delay", gen.retry_base_delay);
    gen.request_timeout = get_or<double>(cfg, "request_timeout", gen.request_timeout);

    BackendOptions backend;
    backend.kind = get_or<std::string>(cfg, "backend", "micro");
    backend.omc_path = get_or<std::string>(cfg, "omc_path", "omc");
    if (cfg.contains("fixture")) {
        backend.fixture = resolve(base, cfg["fixture"].get<std::string>());
        inputs.push_back(*backend.fixture);
    }
    std::optional<fs::path> refs;
    if (cfg.contains("refs")) refs = resolve(base, cfg["refs"].get<std::string>());
    const auto workers = get_or<std::size_t>(cfg, "workers", 1);
    const fs::path bench = resolve(base, cfg["bench"].get<std::string>());
    inputs.push_back(bench);

    GenerateOptions g;
    g.kind = kind;
    g.bench = bench;
    g.config = gen;
    if (cfg.contains("graph")) {
        g.graph = resolve(base, cfg["graph"].get<std::string>());
        inputs.push_back(*g.graph);
    }
    g.retrieval.hops = get_or<std::size_t>(cfg, "hops", g.retrieval.hops);
    g.retrieval.char_budget = get_or<std::size_t>(cfg, "budget", g.retrieval.char_budget);
    g.out = out_dir / "candidates.jsonl";

    // Shared so a scripted endpoint is consumed in sequence across both stages.
    auto transport = make_transport(gen);
    g.transport = transport.get();
    run_generate(g);

    ValidateOptions v;
    v.candidates = g.out;
    v.bench = bench;
    v.backend = backend;
    v.refs = refs;
    v.workers = workers;
    v.out = out_dir / "reports.jsonl";
    run_validate(v);

    RepairOptions r;
    r.candidates = g.out;
    r.reports = v.out;
    r.bench = bench;
    r.backend = backend;
    r.refs = refs;
    r.config = gen;
    r.temperature = gen.temperature;
    r.rounds = get_or<int>(cfg, "rounds", 1);
    r.include_failed_code = get_or<bool>(cfg, "include_failed_code", true);
    r.workers = workers;
    r.out = out_dir / "repaired.jsonl";
    r.attempts_out = out_dir / "attempts.jsonl";
    r.reports_out = out_dir / "final_reports.jsonl";
    r.transport = transport.get();
    run_repair(r);

    EvaluateOptions e;
    e.reports = *r.reports_out;
    e.scenario = get_or<int>(cfg, "scenario", default_scenario(kind));
    e.per_task = get_or<bool>(cfg, "per_task", false);
    e.out = out_dir / "metrics.csv";
    std::ostringstream sink;
    run_evaluate(e, sink);

    return {g.out, v.out, r.out, *r.attempts_out, *r.reports_out, *e.out};
}

}  // namespace modigen::cli
