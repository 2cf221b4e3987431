// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "modigen/genclient.hpp"
#include "modigen/validate.hpp"

namespace modigen {

/// Sentence fed back to the model after a functional mismatch.
inline constexpr std::string_view kFunctionalMismatch = "The current simulation results do not match the expected values!";

struct FeedbackConfig {
    int max_rounds = 1;
    bool include_failed_code = true;
};

struct RepairAttempt {
    int round = 1;
    std::string repair_prompt;
    Candidate candidate;
    ValidationReport report;
};

/// Original prompt, then "Previous attempt:" with the failed code (when enabled), then
/// "Errors:" listing "[Stage] L:C: message" lines for load/check/simulate errors and
/// the fixed mismatch sentence for a functional failure. Throws NoFailure when no stage failed.
std::string build_repair_prompt(std::string_view original_prompt, std::string_view failed_code,
                                const ValidationReport& report, bool include_failed_code = true);

struct RepairOutcome {
    Candidate final_candidate;
    ValidationReport final_report;
    std::vector<RepairAttempt> attempts;
};

/// Repairs while the latest report is not pass_f and rounds remain, one sample per
/// round. `initial` may be null, in which case the candidate is validated first.
/// AuthError propagates; other transport failures consume the round.
RepairOutcome repair_loop(const BenchTask& task, const Candidate& candidate, const ValidationReport* initial,
                          BackendSession& session, const GenerationConfig& generation, ChatTransport& transport,
                          const FeedbackConfig& config, const FunctionalSpec* spec = nullptr);

std::string to_json_line(const RepairAttempt& attempt);
void write_attempts(const std::vector<RepairAttempt>& attempts, const std::filesystem::path& path);

}  // namespace modigen
