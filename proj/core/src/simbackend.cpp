// SPDX-License-Identifier: Apache-2.0
#include "modigen/simbackend.hpp"

#include <cerrno>
#include <charconv>
#include <cstdlib>
#include <unistd.h>

#include "modigen/error.hpp"
#include "modigen/io.hpp"

namespace modigen {

std::string_view to_string(Severity s) { return s == Severity::Error ? "Error" : "Warning"; }

std::string_view to_string(Stage s) {
    switch (s) {
        case Stage::Load: return "Load";
        case Stage::Check: return "Check";
        case Stage::Simulate: return "Simulate";
        case Stage::Functional: return "Functional";
    }
    return "?";
}

Stage stage_from_string(std::string_view s) {
    for (auto st : {Stage::Load, Stage::Check, Stage::Simulate, Stage::Functional})
        if (to_string(st) == s) return st;
    throw FormatError("unknown stage '" + std::string(s) + "'");
}

std::string Diagnostic::located() const {
    if (line && column) return std::to_string(*line) + ":" + std::to_string(*column) + ": " + message;
    if (line) return std::to_string(*line) + ": " + message;
    return message;
}

Diagnostic error_diagnostic(Stage stage, std::string message, std::optional<int> line, std::optional<int> column) {
    return Diagnostic{Severity::Error, stage, std::move(message), line, column};
}

void check_trajectory(const Trajectory& t) {
    if (t.times.size() != t.values.size())
        throw FormatError("trajectory '" + t.variable + "': times and values differ in length");
    if (t.times.size() < 2) throw FormatError("trajectory '" + t.variable + "': fewer than two samples");
    for (std::size_t i = 1; i < t.times.size(); ++i)
        if (!(t.times[i] > t.times[i - 1]))
            throw FormatError("trajectory '" + t.variable + "': times not strictly increasing");
}

namespace {

std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> cells;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            cells.push_back(std::move(cur));
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    cells.push_back(std::move(cur));
    for (auto& cell : cells) {
        const auto b = cell.find_first_not_of(" \t");
        const auto e = cell.find_last_not_of(" \t");
        cell = b == std::string::npos ? std::string{} : cell.substr(b, e - b + 1);
    }
    return cells;
}

double parse_number(const std::string& cell, std::size_t row) {
    const char* begin = cell.c_str();
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0') throw FormatError("row " + std::to_string(row) + ": not a number: '" + cell + "'");
    return v;
}

std::string format_number(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

}  // namespace

std::vector<Trajectory> parse_trajectory_csv(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t nl = text.find('\n', start);
        if (nl == std::string_view::npos) nl = text.size();
        std::string_view line = text.substr(start, nl - start);
        if (line.find_first_not_of(" \t\r") != std::string_view::npos) lines.push_back(line);
        start = nl + 1;
    }
    if (lines.empty()) throw FormatError("trajectory CSV is empty");
    const auto header = split_csv_line(lines.front());
    if (header.empty() || header.front() != "time") throw FormatError("trajectory CSV must start with a \"time\" column");

    std::vector<Trajectory> out(header.size() - 1);
    for (std::size_t c = 1; c < header.size(); ++c) out[c - 1].variable = header[c];
    std::vector<double> times;
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto cells = split_csv_line(lines[r]);
        if (cells.size() != header.size())
            throw FormatError("row " + std::to_string(r + 1) + ": expected " + std::to_string(header.size()) +
                              " columns, found " + std::to_string(cells.size()));
        const double t = parse_number(cells[0], r + 1);
        // Event iterations can repeat a time stamp; the last value at that instant wins.
        if (!times.empty() && t == times.back()) {
            for (std::size_t c = 1; c < cells.size(); ++c) out[c - 1].values.back() = parse_number(cells[c], r + 1);
            continue;
        }
        times.push_back(t);
        for (std::size_t c = 1; c < cells.size(); ++c) out[c - 1].values.push_back(parse_number(cells[c], r + 1));
    }
    for (auto& t : out) {
        t.times = times;
        check_trajectory(t);
    }
    return out;
}

std::vector<Trajectory> read_trajectory_csv(const std::filesystem::path& path) {
    try {
        return parse_trajectory_csv(read_file(path));
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

std::string trajectories_to_csv(const std::vector<Trajectory>& trajectories) {
    std::string out = "time";
    for (const auto& t : trajectories) out += "," + t.variable;
    out += '\n';
    if (trajectories.empty()) return out;
    const auto& grid = trajectories.front().times;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        out += format_number(grid[i]);
        for (const auto& t : trajectories) out += "," + format_number(t.values.at(i));
        out += '\n';
    }
    return out;
}

std::optional<std::filesystem::path> find_executable(std::string_view name) {
    namespace fs = std::filesystem;
    if (name.empty()) return std::nullopt;
    if (name.find('/') != std::string_view::npos) {
        if (::access(std::string(name).c_str(), X_OK) == 0) return fs::path(name);
        return std::nullopt;
    }
    const char* path = std::getenv("PATH");
    if (path == nullptr) return std::nullopt;
    std::string_view rest(path);
    while (true) {
        const auto colon = rest.find(':');
        std::string dir(rest.substr(0, colon));
        if (dir.empty()) dir = ".";
        fs::path candidate = fs::path(dir) / name;
        std::error_code ec;
        if (fs::is_regular_file(candidate, ec) && ::access(candidate.c_str(), X_OK) == 0) return candidate;
        if (colon == std::string_view::npos) break;
        rest.remove_prefix(colon + 1);
    }
    return std::nullopt;
}

}  // namespace modigen
