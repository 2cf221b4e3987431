// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <map>
#include <optional>
#include <set>

#include "json.hpp"

#include "modigen/error.hpp"
#include "modigen/io.hpp"
#include "modigen/parser.hpp"
#include "modigen/simbackend.hpp"

namespace modigen {
namespace {

using json = nlohmann::json;

struct Outcome {
    bool ok = true;
    bool crash = false;
    std::vector<Diagnostic> diagnostics;
    std::vector<Trajectory> trajectories;
};

Trajectory trajectory_from(const std::string& name, const json& j) {
    Trajectory t;
    t.variable = name;
    if (j.contains("constant")) {
        const double c = j.at("constant").get<double>();
        const double t0 = j.value("start", 0.0);
        const double t1 = j.value("stop", 1.0);
        const int points = j.value("points", 2);
        if (points < 2) throw FixtureFormatError("trajectory '" + name + "': points must be >= 2");
        for (int i = 0; i < points; ++i) {
            t.times.push_back(t0 + (t1 - t0) * i / (points - 1));
            t.values.push_back(c);
        }
    } else {
        t.times = j.at("times").get<std::vector<double>>();
        t.values = j.at("values").get<std::vector<double>>();
    }
    try {
        check_trajectory(t);
    } catch (const FormatError& e) {
        throw FixtureFormatError(e.what());
    }
    return t;
}

Outcome outcome_from(const json& j, Stage stage) {
    Outcome o;
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "ok") return o;
        if (s == "crash") {
            o.ok = false;
            o.crash = true;
            return o;
        }
        if (s == "fail") {
            o.ok = false;
            o.diagnostics.push_back(error_diagnostic(stage, "scripted " + std::string(to_string(stage)) + " failure"));
            return o;
        }
        throw FixtureFormatError("unknown outcome '" + s + "'");
    }
    if (j.is_boolean()) {
        o.ok = j.get<bool>();
        if (!o.ok) o.diagnostics.push_back(error_diagnostic(stage, "scripted " + std::string(to_string(stage)) + " failure"));
        return o;
    }
    if (!j.is_object()) throw FixtureFormatError("outcome must be a string, boolean or object");
    o.crash = j.value("crash", false);
    if (j.contains("message")) {
        std::optional<int> line, col;
        if (j.contains("line")) line = j.at("line").get<int>();
        if (j.contains("column")) col = j.at("column").get<int>();
        o.diagnostics.push_back(error_diagnostic(stage, j.at("message").get<std::string>(), line, col));
    }
    if (j.contains("diagnostics")) {
        for (const auto& d : j.at("diagnostics")) {
            Diagnostic diag = error_diagnostic(stage, d.at("message").get<std::string>());
            if (d.value("severity", "Error") == "Warning") diag.severity = Severity::Warning;
            if (d.contains("line")) diag.line = d.at("line").get<int>();
            if (d.contains("column")) diag.column = d.at("column").get<int>();
            o.diagnostics.push_back(std::move(diag));
        }
    }
    const bool has_error = std::any_of(o.diagnostics.begin(), o.diagnostics.end(),
                                       [](const Diagnostic& d) { return d.severity == Severity::Error; });
    o.ok = j.value("ok", !has_error) && !o.crash;
    if (!o.ok && !has_error && !o.crash)
        o.diagnostics.push_back(error_diagnostic(stage, "scripted " + std::string(to_string(stage)) + " failure"));
    if (j.contains("trajectories"))
        for (const auto& [name, tj] : j.at("trajectories").items()) o.trajectories.push_back(trajectory_from(name, tj));
    return o;
}

struct ModelScript {
    std::optional<Outcome> load, check, simulate;
};

class MockSession final : public BackendSession {
public:
    explicit MockSession(std::string_view fixture_json) {
        try {
            const json j = json::parse(fixture_json);
            if (!j.is_object()) throw FixtureFormatError("fixture must be a JSON object");
            const json defaults = j.value("defaults", json::object());
            if (defaults.contains("load")) default_load_ = outcome_from(defaults.at("load"), Stage::Load);
            if (defaults.contains("check")) default_check_ = outcome_from(defaults.at("check"), Stage::Check);
            if (defaults.contains("simulate")) default_sim_ = outcome_from(defaults.at("simulate"), Stage::Simulate);
            if (defaults.contains("library")) default_lib_ = outcome_from(defaults.at("library"), Stage::Load);
            const json libraries = j.value("libraries", json::object());
            const json models = j.value("models", json::object());
            for (const auto& [name, lj] : libraries.items())
                libraries_[name] = outcome_from(lj, Stage::Load);
            for (const auto& [name, mj] : models.items()) {
                if (!mj.is_object()) throw FixtureFormatError("model entry '" + name + "' must be an object");
                ModelScript s;
                if (mj.contains("load")) s.load = outcome_from(mj.at("load"), Stage::Load);
                if (mj.contains("check")) s.check = outcome_from(mj.at("check"), Stage::Check);
                if (mj.contains("simulate")) s.simulate = outcome_from(mj.at("simulate"), Stage::Simulate);
                models_[name] = std::move(s);
            }
        } catch (const json::exception& e) {
            throw FixtureFormatError(std::string("malformed mock fixture: ") + e.what());
        }
    }

    StageResult load_code(std::string_view code) override {
        ensure_alive();
        const std::string name = first_class_name(code);
        Outcome o = default_load_;
        auto script = models_.find(name);
        if (script != models_.end() && script->second.load) {
            o = *script->second.load;
        } else {
            try {
                if (parse_unit(code).empty()) o = {false, false, {error_diagnostic(Stage::Load, "no class definition found")}, {}};
            } catch (const SourceError& e) {
                o = {false, false, {error_diagnostic(Stage::Load, e.message(), e.line(), e.column())}, {}};
            }
        }
        apply_crash(o);
        if (o.ok) {
            loaded_.insert(name);
            failed_.erase(name);
        } else {
            failed_.insert(name);
            loaded_.erase(name);
        }
        return {o.ok, o.diagnostics};
    }

    StageResult load_library(std::string_view name) override {
        ensure_alive();
        auto it = libraries_.find(std::string(name));
        Outcome o = it != libraries_.end() ? it->second : default_lib_;
        apply_crash(o);
        return {o.ok, o.diagnostics};
    }

    StageResult check(std::string_view model_name) override {
        ensure_alive();
        if (auto missing = require_loaded(model_name, Stage::Check)) return {false, {*missing}};
        auto script = models_.find(std::string(model_name));
        Outcome o = script != models_.end() && script->second.check ? *script->second.check : default_check_;
        apply_crash(o);
        return {o.ok, o.diagnostics};
    }

    SimulationResult simulate(std::string_view model_name, const SimSettings& settings) override {
        ensure_alive();
        if (auto missing = require_loaded(model_name, Stage::Simulate)) return {false, {}, {*missing}};
        auto script = models_.find(std::string(model_name));
        Outcome o = script != models_.end() && script->second.simulate ? *script->second.simulate : default_sim_;
        apply_crash(o);
        std::vector<Trajectory> out;
        for (auto& t : o.trajectories) {
            if (!settings.output_variables.empty() &&
                std::find(settings.output_variables.begin(), settings.output_variables.end(), t.variable) ==
                    settings.output_variables.end())
                continue;
            out.push_back(t);
        }
        return {o.ok, o.ok ? std::move(out) : std::vector<Trajectory>{}, o.diagnostics};
    }

    bool alive() const override { return alive_; }

private:
    void ensure_alive() const {
        if (!alive_) throw BackendUnavailable("mock session has crashed");
    }

    void apply_crash(const Outcome& o) {
        if (!o.crash) return;
        alive_ = false;
        throw BackendUnavailable("mock session crashed (scripted)");
    }

    std::optional<Diagnostic> require_loaded(std::string_view name, Stage stage) const {
        const std::string n(name);
        if (failed_.count(n)) return error_diagnostic(stage, "class '" + n + "' failed to load");
        if (!loaded_.count(n)) return error_diagnostic(stage, "class '" + n + "' not found");
        return std::nullopt;
    }

    Outcome default_load_, default_check_, default_sim_, default_lib_;
    std::map<std::string, Outcome> libraries_;
    std::map<std::string, ModelScript> models_;
    std::set<std::string> loaded_, failed_;
    bool alive_ = true;
};

}  // namespace

std::unique_ptr<BackendSession> make_mock_backend_from_json(std::string_view fixture_json) {
    return std::make_unique<MockSession>(fixture_json);
}

std::unique_ptr<BackendSession> make_mock_backend(const std::filesystem::path& fixture) {
    std::string text;
    try {
        text = read_file(fixture);
    } catch (const IoError& e) {
        throw FixtureFormatError(e.what());
    }
    return make_mock_backend_from_json(text);
}

}  // namespace modigen
