// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "modigen/genclient.hpp"
#include "modigen/simbackend.hpp"

namespace modigen {

enum class StageStatus { Pass, Fail, Skipped, NotRun };

std::string_view to_string(StageStatus s);
StageStatus stage_status_from_string(std::string_view s);

struct StageOutcome {
    Stage stage = Stage::Load;
    StageStatus status = StageStatus::NotRun;
    std::vector<Diagnostic> diagnostics;
    double elapsed = 0.0;  // seconds
};

struct ValidationReport {
    std::string task_id;
    int sample_index = 0;
    int round = 0;
    std::vector<StageOutcome> stages;  // Load, Check, Simulate, Functional
    bool pass_s = false;
    bool pass_f = false;

    const StageOutcome& stage(Stage s) const { return stages.at(static_cast<std::size_t>(s)); }
    /// True when some stage failed (the precondition for a repair prompt).
    bool has_failure() const;
};

struct FunctionalSpec {
    std::vector<Trajectory> reference;
    std::vector<std::string> compared_variables;  // empty: intersection, excluding "time"
    double transient_skip_fraction = 0.1;
    std::size_t grid_points = 500;
    double nmse_threshold = 1e-3;
    double variance_floor = 1e-12;

    /// Throws Error when a field is out of range.
    void validate() const;
};

struct ComparisonResult {
    bool pass = false;
    std::map<std::string, double> nmse;
    std::map<std::string, double> mse;
    std::vector<Diagnostic> diagnostics;
};

/// Variance-normalized MSE over the shared time window after the transient is skipped.
ComparisonResult compare_trajectories(const std::vector<Trajectory>& candidate, const FunctionalSpec& spec);

/// Linear interpolation of a trajectory at time t (clamped to its ends).
double interpolate(const Trajectory& t, double time);

/// Runs Load, Check, Simulate and Functional in order. Without `spec`, a reference
/// model on the task is simulated on the same session to obtain one. Never throws for
/// backend failures: a dead session leaves the remaining stages NotRun.
ValidationReport run_pipeline(const Candidate& candidate, const BenchTask& task, BackendSession& session,
                              const FunctionalSpec* spec = nullptr);

/// Reports in candidate order. Each worker owns one session from `factory`; a session
/// that dies is replaced and its candidate retried once. `specs` is keyed by task id.
std::vector<ValidationReport> validate_batch(const std::vector<Candidate>& candidates,
                                             const std::vector<BenchTask>& tasks, const BackendFactory& factory,
                                             const std::map<std::string, FunctionalSpec>& specs = {},
                                             std::size_t workers = 1);

/// Reference specs for tasks that name a reference trajectory file, resolved against `refs_dir`.
std::map<std::string, FunctionalSpec> load_reference_specs(const std::vector<BenchTask>& tasks,
                                                           const std::filesystem::path& refs_dir);

/// Elapsed times are omitted unless `with_timings`, so reruns produce identical files.
std::string to_json_line(const ValidationReport& report, bool with_timings = false);
ValidationReport report_from_json(std::string_view line);
std::vector<ValidationReport> read_reports(const std::filesystem::path& path);
void write_reports(const std::vector<ValidationReport>& reports, const std::filesystem::path& path,
                   bool with_timings = false);

}  // namespace modigen
