// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "modigen/ast.hpp"

namespace modigen {

enum class Severity { Error, Warning };
enum class Stage { Load, Check, Simulate, Functional };

std::string_view to_string(Severity s);
std::string_view to_string(Stage s);
Stage stage_from_string(std::string_view s);

struct Diagnostic {
    Severity severity = Severity::Error;
    Stage stage = Stage::Load;
    std::string message;
    std::optional<int> line;
    std::optional<int> column;

    /// "L:C: message" when a position is known, else the message alone.
    std::string located() const;
    bool operator==(const Diagnostic&) const = default;
};

Diagnostic error_diagnostic(Stage stage, std::string message, std::optional<int> line = {},
                            std::optional<int> column = {});

struct Trajectory {
    std::string variable;
    std::vector<double> times;
    std::vector<double> values;

    bool operator==(const Trajectory&) const = default;
};

/// Throws FormatError when times are not strictly increasing, sizes differ, or there
/// are fewer than two samples.
void check_trajectory(const Trajectory& t);

struct SimSettings {
    double stop_time = 1.0;
    double step = 1e-3;        // micro backend only
    double tolerance = 1e-6;   // external compiler only
    std::vector<std::string> output_variables;  // empty means all

    bool operator==(const SimSettings&) const = default;
};

struct StageResult {
    bool ok = true;
    std::vector<Diagnostic> diagnostics;
};

struct SimulationResult {
    bool ok = true;
    std::vector<Trajectory> trajectories;
    std::vector<Diagnostic> diagnostics;
};

/// One modelling session. Single owner: callers must not issue concurrent requests.
/// Implementations report failures through diagnostics and throw BackendUnavailable
/// only when the session itself is no longer usable.
class BackendSession {
public:
    virtual ~BackendSession() = default;
    virtual StageResult load_code(std::string_view code) = 0;
    virtual StageResult load_library(std::string_view name) = 0;
    virtual StageResult check(std::string_view model_name) = 0;
    virtual SimulationResult simulate(std::string_view model_name, const SimSettings& settings) = 0;
    virtual void dispose() {}
    /// False once the session has died and must be replaced.
    virtual bool alive() const { return true; }
};

using BackendFactory = std::function<std::unique_ptr<BackendSession>()>;

/// CSV with a header row whose first column is "time". Quoted headers are accepted.
std::vector<Trajectory> parse_trajectory_csv(std::string_view text);
std::vector<Trajectory> read_trajectory_csv(const std::filesystem::path& path);
std::string trajectories_to_csv(const std::vector<Trajectory>& trajectories);

/// Fixed-step explicit Euler over a flat model. Throws UnsupportedConstruct when the
/// component is outside the supported subset and NumericError on NaN/Inf.
std::vector<Trajectory> micro_simulate(const Component& component, const SimSettings& settings);

/// Sample count of the micro backend's time grid for the given settings.
std::size_t micro_sample_count(const SimSettings& settings);

std::unique_ptr<BackendSession> make_micro_backend();

/// Throws FixtureFormatError when the fixture is malformed.
std::unique_ptr<BackendSession> make_mock_backend(const std::filesystem::path& fixture);
std::unique_ptr<BackendSession> make_mock_backend_from_json(std::string_view fixture_json);

struct OmcOptions {
    std::string executable = "omc";
    std::filesystem::path workdir;  // empty: a fresh temp directory
    double request_timeout = 120.0;
};

/// Throws SpawnError when the executable cannot be found or started.
std::unique_ptr<BackendSession> make_omc_backend(const OmcOptions& options);

/// Full path of an executable found via PATH (or the path itself when it contains '/').
std::optional<std::filesystem::path> find_executable(std::string_view name);

}  // namespace modigen
