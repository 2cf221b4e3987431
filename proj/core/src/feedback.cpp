// SPDX-License-Identifier: Apache-2.0
#include "modigen/feedback.hpp"

#include "json.hpp"

#include "modigen/error.hpp"
#include "modigen/io.hpp"

namespace modigen {

std::string build_repair_prompt(std::string_view original_prompt, std::string_view failed_code,
                                const ValidationReport& report, bool include_failed_code) {
    if (!report.has_failure()) throw NoFailure();
    std::string out(original_prompt);
    if (!out.empty() && out.back() != '\n') out += '\n';
    if (include_failed_code) {
        out += "\nPrevious attempt:\n```modelica\n";
        out += failed_code;
        if (!failed_code.empty() && failed_code.back() != '\n') out += '\n';
        out += "```\n";
    }
    out += "\nErrors:\n";
    for (const auto& stage : report.stages) {
        if (stage.status != StageStatus::Fail) continue;
        if (stage.stage == Stage::Functional) {
            out += std::string(kFunctionalMismatch) + "\n";
            continue;
        }
        for (const auto& d : stage.diagnostics) {
            if (d.severity != Severity::Error) continue;
            out += "[" + std::string(to_string(stage.stage)) + "] " + d.located() + "\n";
        }
    }
    return out;
}

RepairOutcome repair_loop(const BenchTask& task, const Candidate& candidate, const ValidationReport* initial,
                          BackendSession& session, const GenerationConfig& generation, ChatTransport& transport,
                          const FeedbackConfig& config, const FunctionalSpec* spec) {
    if (config.max_rounds < 0) throw Error("max_rounds must be non-negative");
    RepairOutcome out;
    out.final_candidate = candidate;
    out.final_report = initial != nullptr ? *initial : run_pipeline(candidate, task, session, spec);

    GenerationConfig one = generation;
    one.n_samples = 1;
    for (int round = 1; round <= config.max_rounds && !out.final_report.pass_f; ++round) {
        // A report can fail pass_f without a failed stage only through NotRun stages
        // (dead backend); there is nothing to tell the model in that case.
        if (!out.final_report.has_failure()) break;
        RepairAttempt attempt;
        attempt.round = round;
        attempt.repair_prompt =
            build_repair_prompt(task.prompt, out.final_candidate.code, out.final_report, config.include_failed_code);
        std::vector<Candidate> produced = sample(one, transport, candidate.task_id, attempt.repair_prompt, round);
        attempt.candidate = std::move(produced.front());
        attempt.candidate.sample_index = candidate.sample_index;
        attempt.report = run_pipeline(attempt.candidate, task, session, spec);
        out.final_candidate = attempt.candidate;
        out.final_report = attempt.report;
        out.attempts.push_back(std::move(attempt));
    }
    return out;
}

std::string to_json_line(const RepairAttempt& a) {
    nlohmann::ordered_json j;
    j["round"] = a.round;
    j["task_id"] = a.candidate.task_id;
    j["sample_index"] = a.candidate.sample_index;
    j["repair_prompt"] = a.repair_prompt;
    j["candidate"] = nlohmann::ordered_json::parse(to_json_line(a.candidate));
    j["report"] = nlohmann::ordered_json::parse(to_json_line(a.report));
    return j.dump();
}

void write_attempts(const std::vector<RepairAttempt>& attempts, const std::filesystem::path& path) {
    std::string text;
    for (const auto& a : attempts) text += to_json_line(a) + "\n";
    write_file_atomic(path, text);
}

}  // namespace modigen
