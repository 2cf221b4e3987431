// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cerrno>
#include <charconv>
#include <chrono>
#include <csignal>
#include <cstring>
#include <regex>

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

#include "modigen/error.hpp"
#include "modigen/io.hpp"
#include "modigen/parser.hpp"
#include "modigen/simbackend.hpp"

namespace modigen {
namespace fs = std::filesystem;
namespace {

constexpr const char* kResultMark = "<<<RESULT";
constexpr const char* kErrorsMark = "<<<ERRORS";
constexpr const char* kEndMark = "<<<END";

struct ProcessOutput {
    std::string out;
    int status = 0;
};

// Runs argv in `cwd`, collecting stdout and stderr, killing it after `timeout` seconds.
ProcessOutput run_process(const std::vector<std::string>& argv, const fs::path& cwd, double timeout) {
    int out_pipe[2];
    int err_pipe[2];
    int exec_pipe[2];
    if (::pipe(out_pipe) != 0 || ::pipe(err_pipe) != 0 || ::pipe2(exec_pipe, O_CLOEXEC) != 0)
        throw SpawnError(std::string("pipe: ") + std::strerror(errno));

    const pid_t pid = ::fork();
    if (pid < 0) throw SpawnError(std::string("fork: ") + std::strerror(errno));
    if (pid == 0) {
        ::dup2(out_pipe[1], STDOUT_FILENO);
        ::dup2(err_pipe[1], STDERR_FILENO);
        ::close(out_pipe[0]);
        ::close(err_pipe[0]);
        ::close(exec_pipe[0]);
        const int devnull = ::open("/dev/null", O_RDONLY);
        if (devnull >= 0) ::dup2(devnull, STDIN_FILENO);
        if (::chdir(cwd.c_str()) != 0) _exit(126);
        std::vector<char*> args;
        for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
        args.push_back(nullptr);
        ::execv(args[0], args.data());
        const int err = errno;
        [[maybe_unused]] auto n = ::write(exec_pipe[1], &err, sizeof err);
        _exit(127);
    }
    ::close(out_pipe[1]);
    ::close(err_pipe[1]);
    ::close(exec_pipe[1]);

    int exec_errno = 0;
    if (::read(exec_pipe[0], &exec_errno, sizeof exec_errno) == static_cast<ssize_t>(sizeof exec_errno)) {
        ::close(exec_pipe[0]);
        ::close(out_pipe[0]);
        ::close(err_pipe[0]);
        ::waitpid(pid, nullptr, 0);
        throw SpawnError("cannot execute " + argv[0] + ": " + std::strerror(exec_errno));
    }
    ::close(exec_pipe[0]);

    ProcessOutput result;
    std::string err_text;
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout);
    pollfd fds[2] = {{out_pipe[0], POLLIN, 0}, {err_pipe[0], POLLIN, 0}};
    int open_fds = 2;
    char buf[4096];
    while (open_fds > 0) {
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        if (left.count() <= 0) {
            ::kill(pid, SIGKILL);
            ::waitpid(pid, nullptr, 0);
            ::close(out_pipe[0]);
            ::close(err_pipe[0]);
            throw ProtocolTimeout(timeout);
        }
        const int rc = ::poll(fds, 2, static_cast<int>(left.count()));
        if (rc < 0 && errno == EINTR) continue;
        if (rc < 0) break;
        for (int i = 0; i < 2; ++i) {
            if (fds[i].fd < 0 || !(fds[i].revents & (POLLIN | POLLHUP | POLLERR))) continue;
            const ssize_t n = ::read(fds[i].fd, buf, sizeof buf);
            if (n > 0) {
                (i == 0 ? result.out : err_text).append(buf, static_cast<std::size_t>(n));
            } else {
                ::close(fds[i].fd);
                fds[i].fd = -1;
                --open_fds;
            }
        }
    }
    int status = 0;
    ::waitpid(pid, &status, 0);
    result.status = status;
    result.out += err_text;
    return result;
}

std::string format_number(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

std::string mos_string(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out + "\"";
}

std::string unquote(std::string s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    const auto e = s.find_last_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    s = s.substr(b, e - b + 1);
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
        std::string out;
        for (std::size_t i = 1; i + 1 < s.size(); ++i) {
            if (s[i] == '\\' && i + 2 < s.size()) {
                const char n = s[++i];
                out += n == 'n' ? '\n' : n;
            } else {
                out += s[i];
            }
        }
        return out;
    }
    return s;
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    const auto e = s.find_last_not_of(" \t\r\n");
    return b == std::string_view::npos ? std::string{} : std::string(s.substr(b, e - b + 1));
}

// "[file.mo:3:14-3:20:writable] Error: text" lines become positioned diagnostics.
std::vector<Diagnostic> parse_error_string(const std::string& text, Stage stage) {
    static const std::regex located(R"(^\[[^\]]*?:(\d+):(\d+)-\d+:\d+[^\]]*\]\s*(Error|Warning):\s*(.*)$)");
    static const std::regex plain(R"(^(?:\[[^\]]*\]\s*)?(Error|Warning):\s*(.*)$)");
    std::vector<Diagnostic> out;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t nl = text.find('\n', start);
        if (nl == std::string::npos) nl = text.size();
        const std::string line = trim(std::string_view(text).substr(start, nl - start));
        start = nl + 1;
        if (line.empty()) continue;
        std::smatch m;
        Diagnostic d;
        d.stage = stage;
        if (std::regex_match(line, m, located)) {
            d.line = std::stoi(m[1]);
            d.column = std::stoi(m[2]);
            d.severity = m[3] == "Warning" ? Severity::Warning : Severity::Error;
            d.message = m[4];
        } else if (std::regex_match(line, m, plain)) {
            d.severity = m[1] == "Warning" ? Severity::Warning : Severity::Error;
            d.message = m[2];
        } else if (!out.empty()) {
            out.back().message += " " + line;
            continue;
        } else {
            d.message = line;
        }
        out.push_back(std::move(d));
    }
    return out;
}

bool has_error(const std::vector<Diagnostic>& ds) {
    return std::any_of(ds.begin(), ds.end(), [](const Diagnostic& d) { return d.severity == Severity::Error; });
}

class OmcSession final : public BackendSession {
public:
    explicit OmcSession(const OmcOptions& options) : options_(options) {
        auto exe = find_executable(options.executable);
        if (!exe) throw SpawnError("Modelica compiler '" + options.executable + "' not found");
        executable_ = fs::absolute(*exe);
        std::error_code ec;
        if (options.workdir.empty()) {
            std::string templ = (fs::temp_directory_path() / "modigen-omc-XXXXXX").string();
            if (::mkdtemp(templ.data()) == nullptr) throw SpawnError(std::string("mkdtemp: ") + std::strerror(errno));
            workdir_ = templ;
            owns_workdir_ = true;
        } else {
            workdir_ = fs::absolute(options.workdir);
            fs::create_directories(workdir_, ec);
        }
    }

    ~OmcSession() override { dispose(); }

    StageResult load_code(std::string_view code) override {
        const fs::path file = workdir_ / ("candidate_" + std::to_string(++files_) + ".mo");
        write_file_atomic(file, code);
        const std::string cmd = "loadFile(" + mos_string(file.string()) + ")";
        const Reply r = request(cmd);
        auto diags = parse_error_string(r.errors, Stage::Load);
        if (trim(r.result) == "true" && !has_error(diags)) {
            history_.push_back(cmd);
            return {true, std::move(diags)};
        }
        if (!has_error(diags)) diags.push_back(error_diagnostic(Stage::Load, "loadFile failed: " + trim(r.result)));
        return {false, std::move(diags)};
    }

    StageResult load_library(std::string_view name) override {
        const std::string cmd = "loadModel(" + std::string(name) + ")";
        const Reply r = request(cmd);
        auto diags = parse_error_string(r.errors, Stage::Load);
        if (trim(r.result) == "true") {
            history_.push_back(cmd);
            return {true, std::move(diags)};
        }
        if (!has_error(diags)) diags.push_back(error_diagnostic(Stage::Load, "loadModel(" + std::string(name) + ") failed"));
        return {false, std::move(diags)};
    }

    StageResult check(std::string_view model_name) override {
        const Reply r = request("checkModel(" + std::string(model_name) + ")");
        auto diags = parse_error_string(r.errors, Stage::Check);
        const std::string result = unquote(r.result);
        if (result.find("completed successfully") != std::string::npos && !has_error(diags)) return {true, std::move(diags)};
        if (!has_error(diags))
            diags.push_back(error_diagnostic(Stage::Check, result.empty() ? "checkModel failed" : result));
        return {false, std::move(diags)};
    }

    SimulationResult simulate(std::string_view model_name, const SimSettings& settings) override {
        const Reply r = request("simulate(" + std::string(model_name) + ", stopTime=" + format_number(settings.stop_time) +
                                ", tolerance=" + format_number(settings.tolerance) + ", outputFormat=\"csv\")");
        auto diags = parse_error_string(r.errors, Stage::Simulate);
        static const std::regex result_file(R"re(resultFile\s*=\s*"([^"]*)")re");
        static const std::regex messages(R"re(messages\s*=\s*"((?:[^"\\]|\\.)*)")re");
        std::smatch m;
        std::string path;
        if (std::regex_search(r.result, m, result_file)) path = m[1];
        if (path.empty()) {
            std::smatch mm;
            if (std::regex_search(r.result, mm, messages)) {
                for (auto& d : parse_error_string(unquote("\"" + mm[1].str() + "\""), Stage::Simulate))
                    diags.push_back(std::move(d));
            }
            if (!has_error(diags)) diags.push_back(error_diagnostic(Stage::Simulate, "simulation produced no result file"));
            return {false, {}, std::move(diags)};
        }
        fs::path csv = path;
        if (csv.is_relative()) csv = workdir_ / csv;
        try {
            std::vector<Trajectory> out;
            for (auto& t : read_trajectory_csv(csv)) {
                if (!settings.output_variables.empty() &&
                    std::find(settings.output_variables.begin(), settings.output_variables.end(), t.variable) ==
                        settings.output_variables.end())
                    continue;
                out.push_back(std::move(t));
            }
            return {true, std::move(out), std::move(diags)};
        } catch (const Error& e) {
            diags.push_back(error_diagnostic(Stage::Simulate, std::string("cannot read result file: ") + e.what()));
            return {false, {}, std::move(diags)};
        }
    }

    void dispose() override {
        if (owns_workdir_) {
            std::error_code ec;
            fs::remove_all(workdir_, ec);
            owns_workdir_ = false;
        }
        disposed_ = true;
    }

    bool alive() const override { return alive_ && !disposed_; }

private:
    struct Reply {
        std::string result;
        std::string errors;
    };

    // Every request replays the session's load history in a fresh compiler process,
    // then brackets the command and its error string with sentinels.
    Reply request(const std::string& command) {
        if (disposed_) throw BackendUnavailable("session disposed");
        std::string script;
        for (const auto& h : history_) script += h + ";\n";
        script += "getErrorString();\n";
        script += std::string("print(\"") + kResultMark + "\\n\");\n";
        script += command + ";\n";
        script += std::string("print(\"\\n") + kErrorsMark + "\\n\");\n";
        script += "getErrorString();\n";
        script += std::string("print(\"\\n") + kEndMark + "\\n\");\n";
        const fs::path mos = workdir_ / ("request_" + std::to_string(++requests_) + ".mos");
        write_file_atomic(mos, script);

        ProcessOutput po;
        try {
            po = run_process({executable_.string(), mos.string()}, workdir_, options_.request_timeout);
        } catch (const SpawnError& e) {
            alive_ = false;
            throw BackendUnavailable(e.what());
        }
        const auto r = po.out.find(kResultMark);
        const auto e = po.out.find(kErrorsMark, r == std::string::npos ? 0 : r);
        const auto end = po.out.find(kEndMark, e == std::string::npos ? 0 : e);
        if (r == std::string::npos || e == std::string::npos || end == std::string::npos)
            throw BackendUnavailable("compiler output lacks protocol sentinels (exit status " +
                                     std::to_string(WIFEXITED(po.status) ? WEXITSTATUS(po.status) : -1) + ")");
        Reply reply;
        reply.result = trim(po.out.substr(r + std::strlen(kResultMark), e - r - std::strlen(kResultMark)));
        reply.errors = unquote(po.out.substr(e + std::strlen(kErrorsMark), end - e - std::strlen(kErrorsMark)));
        return reply;
    }

    OmcOptions options_;
    fs::path executable_;
    fs::path workdir_;
    bool owns_workdir_ = false;
    bool disposed_ = false;
    bool alive_ = true;
    std::vector<std::string> history_;
    int files_ = 0;
    int requests_ = 0;
};

}  // namespace

std::unique_ptr<BackendSession> make_omc_backend(const OmcOptions& options) {
    return std::make_unique<OmcSession>(options);
}

}  // namespace modigen
