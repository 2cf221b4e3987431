// SPDX-License-Identifier: Apache-2.0
#include "modigen/validate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>

#include "json.hpp"

#include "modigen/error.hpp"
#include "modigen/io.hpp"
#include "modigen/parallel.hpp"
#include "modigen/parser.hpp"

namespace modigen {
using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

std::string_view to_string(StageStatus s) {
    switch (s) {
        case StageStatus::Pass: return "Pass";
        case StageStatus::Fail: return "Fail";
        case StageStatus::Skipped: return "Skipped";
        case StageStatus::NotRun: return "NotRun";
    }
    return "?";
}

StageStatus stage_status_from_string(std::string_view s) {
    for (auto st : {StageStatus::Pass, StageStatus::Fail, StageStatus::Skipped, StageStatus::NotRun})
        if (to_string(st) == s) return st;
    throw FormatError("unknown stage status '" + std::string(s) + "'");
}

bool ValidationReport::has_failure() const {
    return std::any_of(stages.begin(), stages.end(), [](const StageOutcome& s) { return s.status == StageStatus::Fail; });
}

void FunctionalSpec::validate() const {
    if (!(transient_skip_fraction >= 0.0 && transient_skip_fraction < 1.0))
        throw Error("transient_skip_fraction must be in [0, 1)");
    if (grid_points < 2) throw Error("grid_points must be at least 2");
    if (!(nmse_threshold > 0.0) || !(variance_floor > 0.0)) throw Error("thresholds must be positive");
}

double interpolate(const Trajectory& t, double time) {
    if (time <= t.times.front()) return t.values.front();
    if (time >= t.times.back()) return t.values.back();
    const auto hi = static_cast<std::size_t>(std::upper_bound(t.times.begin(), t.times.end(), time) - t.times.begin());
    const std::size_t lo = hi - 1;
    const double w = (time - t.times[lo]) / (t.times[hi] - t.times[lo]);
    return t.values[lo] + w * (t.values[hi] - t.values[lo]);
}

namespace {

const Trajectory* find_variable(const std::vector<Trajectory>& ts, const std::string& name) {
    for (const auto& t : ts)
        if (t.variable == name) return &t;
    return nullptr;
}

}  // namespace

ComparisonResult compare_trajectories(const std::vector<Trajectory>& candidate, const FunctionalSpec& spec) {
    spec.validate();
    ComparisonResult result;
    auto fail = [&](std::string message) {
        result.diagnostics.push_back(error_diagnostic(Stage::Functional, std::move(message)));
    };

    std::vector<std::string> names = spec.compared_variables;
    if (names.empty()) {
        for (const auto& r : spec.reference)
            if (r.variable != "time" && find_variable(candidate, r.variable)) names.push_back(r.variable);
        if (names.empty()) fail("no variables in common with the reference");
    }

    for (const auto& name : names) {
        const Trajectory* c = find_variable(candidate, name);
        const Trajectory* r = find_variable(spec.reference, name);
        if (c == nullptr) {
            fail("missing variable '" + name + "' in candidate results");
            continue;
        }
        if (r == nullptr) {
            fail("missing variable '" + name + "' in reference");
            continue;
        }
        if (c->times.size() < 2 || r->times.size() < 2 || c->times.size() != c->values.size() ||
            r->times.size() != r->values.size()) {
            fail("variable '" + name + "' has fewer than two samples");
            continue;
        }
        const double t0 = std::max(c->times.front(), r->times.front());
        const double t1 = std::min(c->times.back(), r->times.back());
        if (!(t1 > t0)) {
            fail("empty time overlap for variable '" + name + "'");
            continue;
        }
        const double start = t0 + spec.transient_skip_fraction * (t1 - t0);
        const std::size_t g = spec.grid_points;
        std::vector<double> ref(g), cand(g);
        for (std::size_t i = 0; i < g; ++i) {
            const double t = start + (t1 - start) * static_cast<double>(i) / static_cast<double>(g - 1);
            ref[i] = interpolate(*r, t);
            cand[i] = interpolate(*c, t);
        }
        double mse = 0.0;
        double mean = 0.0;
        for (std::size_t i = 0; i < g; ++i) {
            mse += (cand[i] - ref[i]) * (cand[i] - ref[i]);
            mean += ref[i];
        }
        mse /= static_cast<double>(g);
        mean /= static_cast<double>(g);
        double variance = 0.0;
        for (double v : ref) variance += (v - mean) * (v - mean);
        variance /= static_cast<double>(g);
        const double nmse = mse / std::max(variance, spec.variance_floor);
        result.mse[name] = mse;
        result.nmse[name] = nmse;
        if (!(nmse <= spec.nmse_threshold))
            fail("variable '" + name + "': normalized MSE " + std::to_string(nmse) + " exceeds " +
                 std::to_string(spec.nmse_threshold));
    }
    result.pass = result.diagnostics.empty();
    return result;
}

namespace {

ValidationReport empty_report(const Candidate& c) {
    ValidationReport r;
    r.task_id = c.task_id;
    r.sample_index = c.sample_index;
    r.round = c.round;
    for (auto s : {Stage::Load, Stage::Check, Stage::Simulate, Stage::Functional}) r.stages.push_back({s, StageStatus::NotRun, {}, 0.0});
    return r;
}

void finalize(ValidationReport& r) {
    const auto st = [&](Stage s) { return r.stage(s).status; };
    r.pass_s = st(Stage::Load) == StageStatus::Pass && st(Stage::Check) == StageStatus::Pass &&
               (st(Stage::Simulate) == StageStatus::Pass || st(Stage::Simulate) == StageStatus::Skipped);
    r.pass_f = r.pass_s &&
               (st(Stage::Functional) == StageStatus::Pass || st(Stage::Functional) == StageStatus::Skipped);
}

class StageTimer {
public:
    explicit StageTimer(StageOutcome& o) : o_(o), start_(std::chrono::steady_clock::now()) {}
    ~StageTimer() { o_.elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

private:
    StageOutcome& o_;
    std::chrono::steady_clock::time_point start_;
};

// Records a stage result; returns false when the pipeline must stop.
bool settle(StageOutcome& o, bool ok, std::vector<Diagnostic> diags, const char* fallback) {
    o.diagnostics = std::move(diags);
    for (auto& d : o.diagnostics) d.stage = o.stage;
    o.status = ok ? StageStatus::Pass : StageStatus::Fail;
    const bool has_error = std::any_of(o.diagnostics.begin(), o.diagnostics.end(),
                                       [](const Diagnostic& d) { return d.severity == Severity::Error; });
    if (!ok && !has_error) o.diagnostics.push_back(error_diagnostic(o.stage, fallback));
    return ok;
}

}  // namespace

ValidationReport run_pipeline(const Candidate& candidate, const BenchTask& task, BackendSession& session,
                              const FunctionalSpec* spec) {
    ValidationReport report = empty_report(candidate);
    const SimSettings settings = task.simulation.value_or(SimSettings{});
    StageOutcome* current = &report.stages[0];
    auto at = [&](Stage s) -> StageOutcome& {
        current = &report.stages[static_cast<std::size_t>(s)];
        return *current;
    };

    try {
        {
            StageOutcome& load = at(Stage::Load);
            StageTimer timer(load);
            std::vector<Diagnostic> diags;
            bool ok = true;
            for (const auto& dep : task.dependencies) {
                StageResult r = session.load_library(dep);
                diags.insert(diags.end(), r.diagnostics.begin(), r.diagnostics.end());
                if (!r.ok) {
                    ok = false;
                    break;
                }
            }
            if (ok) {
                StageResult r = session.load_code(candidate.code);
                diags.insert(diags.end(), r.diagnostics.begin(), r.diagnostics.end());
                ok = r.ok;
            }
            if (!settle(load, ok, std::move(diags), "load failed")) {
                finalize(report);
                return report;
            }
        }

        const std::string name = first_class_name(candidate.code);
        {
            StageOutcome& check = at(Stage::Check);
            StageTimer timer(check);
            if (name.empty()) {
                settle(check, false, {}, "no class definition found in candidate");
                finalize(report);
                return report;
            }
            StageResult r = session.check(name);
            if (!settle(check, r.ok, std::move(r.diagnostics), "check failed")) {
                finalize(report);
                return report;
            }
        }

        std::vector<Trajectory> trajectories;
        bool simulated = false;
        {
            StageOutcome& sim = at(Stage::Simulate);
            StageTimer timer(sim);
            if (task.simulation_exempt && !task.use_case_model) {
                sim.status = StageStatus::Skipped;
            } else {
                std::string target = name;
                bool ok = true;
                std::vector<Diagnostic> diags;
                if (task.simulation_exempt) {
                    StageResult r = session.load_code(*task.use_case_model);
                    diags = std::move(r.diagnostics);
                    ok = r.ok;
                    target = first_class_name(*task.use_case_model);
                }
                if (ok) {
                    SimulationResult r = session.simulate(target, settings);
                    diags.insert(diags.end(), r.diagnostics.begin(), r.diagnostics.end());
                    ok = r.ok;
                    trajectories = std::move(r.trajectories);
                }
                if (!settle(sim, ok, std::move(diags), "simulation failed")) {
                    finalize(report);
                    return report;
                }
                simulated = true;
            }
        }

        {
            StageOutcome& fun = at(Stage::Functional);
            StageTimer timer(fun);
            std::optional<FunctionalSpec> resolved;
            if (spec != nullptr) {
                resolved = *spec;
            } else if (task.reference_model && simulated) {
                StageResult lr = session.load_code(*task.reference_model);
                SimulationResult sr;
                if (lr.ok) {
                    sr = session.simulate(first_class_name(*task.reference_model), settings);
                } else {
                    sr.ok = false;
                    sr.diagnostics = lr.diagnostics;
                }
                if (!sr.ok) {
                    std::string why = sr.diagnostics.empty() ? std::string("unknown error") : sr.diagnostics.front().located();
                    settle(fun, false, {error_diagnostic(Stage::Functional, "reference model could not be simulated: " + why)},
                           "reference failed");
                    finalize(report);
                    return report;
                }
                resolved = FunctionalSpec{};
                resolved->reference = std::move(sr.trajectories);
            }
            if (!resolved || !simulated) {
                fun.status = StageStatus::Skipped;
            } else {
                if (resolved->compared_variables.empty()) resolved->compared_variables = task.compared_variables;
                ComparisonResult cr = compare_trajectories(trajectories, *resolved);
                settle(fun, cr.pass, std::move(cr.diagnostics), "functional comparison failed");
            }
        }
    } catch (const BackendUnavailable& e) {
        current->status = StageStatus::NotRun;
        current->diagnostics.push_back(error_diagnostic(current->stage, std::string("backend unavailable: ") + e.what()));
    } catch (const Error& e) {
        current->status = StageStatus::Fail;
        current->diagnostics.push_back(error_diagnostic(current->stage, e.what()));
    }
    finalize(report);
    return report;
}

std::vector<ValidationReport> validate_batch(const std::vector<Candidate>& candidates,
                                             const std::vector<BenchTask>& tasks, const BackendFactory& factory,
                                             const std::map<std::string, FunctionalSpec>& specs, std::size_t workers) {
    std::map<std::string, const BenchTask*> by_id;
    for (const auto& t : tasks) by_id.emplace(t.id, &t);

    std::vector<ValidationReport> reports(candidates.size());
    workers = std::max<std::size_t>(1, std::min(workers, candidates.size()));
    std::vector<std::unique_ptr<BackendSession>> sessions(workers);

    parallel_for(candidates.size(), workers, [&](std::size_t w, std::size_t i) {
        const Candidate& c = candidates[i];
        auto it = by_id.find(c.task_id);
        if (it == by_id.end()) {
            reports[i] = empty_report(c);
            reports[i].stages[0].diagnostics.push_back(error_diagnostic(Stage::Load, "unknown task '" + c.task_id + "'"));
            return;
        }
        const FunctionalSpec* spec = nullptr;
        if (auto s = specs.find(c.task_id); s != specs.end()) spec = &s->second;

        for (int attempt = 0; attempt < 2; ++attempt) {
            if (!sessions[w] || !sessions[w]->alive()) {
                try {
                    sessions[w] = factory();
                } catch (const Error& e) {
                    reports[i] = empty_report(c);
                    reports[i].stages[0].diagnostics.push_back(
                        error_diagnostic(Stage::Load, std::string("backend unavailable: ") + e.what()));
                    return;
                }
            }
            reports[i] = run_pipeline(c, *it->second, *sessions[w], spec);
            if (sessions[w]->alive()) break;
        }
    });
    for (auto& s : sessions)
        if (s) s->dispose();
    return reports;
}

std::map<std::string, FunctionalSpec> load_reference_specs(const std::vector<BenchTask>& tasks,
                                                           const std::filesystem::path& refs_dir) {
    std::map<std::string, FunctionalSpec> out;
    for (const auto& t : tasks) {
        if (!t.reference_trajectories) continue;
        std::filesystem::path p = *t.reference_trajectories;
        if (p.is_relative()) p = refs_dir / p;
        FunctionalSpec spec;
        spec.reference = read_trajectory_csv(p);
        spec.compared_variables = t.compared_variables;
        out.emplace(t.id, std::move(spec));
    }
    return out;
}

std::string to_json_line(const ValidationReport& r, bool with_timings) {
    ojson j;
    j["task_id"] = r.task_id;
    j["sample_index"] = r.sample_index;
    j["round"] = r.round;
    j["pass_s"] = r.pass_s;
    j["pass_f"] = r.pass_f;
    ojson stages = ojson::array();
    for (const auto& s : r.stages) {
        ojson js;
        js["stage"] = to_string(s.stage);
        js["status"] = to_string(s.status);
        ojson diags = ojson::array();
        for (const auto& d : s.diagnostics) {
            ojson jd;
            jd["severity"] = to_string(d.severity);
            jd["stage"] = to_string(d.stage);
            jd["message"] = d.message;
            if (d.line) jd["line"] = *d.line;
            if (d.column) jd["column"] = *d.column;
            diags.push_back(std::move(jd));
        }
        js["diagnostics"] = std::move(diags);
        if (with_timings) js["elapsed"] = s.elapsed;
        stages.push_back(std::move(js));
    }
    j["stages"] = std::move(stages);
    return j.dump();
}

ValidationReport report_from_json(std::string_view line) {
    try {
        const json j = json::parse(line);
        ValidationReport r;
        r.task_id = j.at("task_id").get<std::string>();
        r.sample_index = j.at("sample_index").get<int>();
        r.round = j.value("round", 0);
        r.pass_s = j.at("pass_s").get<bool>();
        r.pass_f = j.at("pass_f").get<bool>();
        for (const auto& js : j.at("stages")) {
            StageOutcome o;
            o.stage = stage_from_string(js.at("stage").get<std::string>());
            o.status = stage_status_from_string(js.at("status").get<std::string>());
            o.elapsed = js.value("elapsed", 0.0);
            for (const auto& jd : js.value("diagnostics", json::array())) {
                Diagnostic d;
                d.severity = jd.value("severity", "Error") == "Warning" ? Severity::Warning : Severity::Error;
                d.stage = stage_from_string(jd.value("stage", std::string(to_string(o.stage))));
                d.message = jd.at("message").get<std::string>();
                if (jd.contains("line")) d.line = jd["line"].get<int>();
                if (jd.contains("column")) d.column = jd["column"].get<int>();
                o.diagnostics.push_back(std::move(d));
            }
            r.stages.push_back(std::move(o));
        }
        if (r.stages.size() != 4) throw FormatError("report must have exactly 4 stages");
        return r;
    } catch (const json::exception& e) {
        throw FormatError(std::string("invalid report line: ") + e.what());
    }
}

std::vector<ValidationReport> read_reports(const std::filesystem::path& path) {
    std::vector<ValidationReport> out;
    for (const auto& line : read_jsonl_lines(path)) out.push_back(report_from_json(line));
    return out;
}

void write_reports(const std::vector<ValidationReport>& reports, const std::filesystem::path& path, bool with_timings) {
    std::string text;
    for (const auto& r : reports) text += to_json_line(r, with_timings) + "\n";
    write_file_atomic(path, text);
}

}  // namespace modigen
