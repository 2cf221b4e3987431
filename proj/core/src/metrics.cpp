// SPDX-License-Identifier: Apache-2.0
#include "modigen/metrics.hpp"

#include <cstdio>
#include <map>
#include <set>

#include "modigen/error.hpp"

namespace modigen {

double pass_at_k(int n, int c, int k) {
    if (k < 1 || k > n) throw DomainError("pass@k needs 1 <= k <= n (n=" + std::to_string(n) + ", k=" + std::to_string(k) + ")");
    if (c < 0 || c > n) throw DomainError("pass@k needs 0 <= c <= n (n=" + std::to_string(n) + ", c=" + std::to_string(c) + ")");
    if (n - c < k) return 1.0;
    double prod = 1.0;
    for (int i = n - c + 1; i <= n; ++i) prod *= 1.0 - static_cast<double>(k) / static_cast<double>(i);
    return 1.0 - prod;
}

std::vector<TaskResult> task_results(const std::vector<ValidationReport>& reports) {
    std::map<std::pair<std::string, int>, const ValidationReport*> latest;
    std::vector<std::string> order;
    std::set<std::string> seen;
    for (const auto& r : reports) {
        if (seen.insert(r.task_id).second) order.push_back(r.task_id);
        auto& slot = latest[{r.task_id, r.sample_index}];
        if (slot == nullptr || r.round >= slot->round) slot = &r;
    }
    std::map<std::string, TaskResult> by_task;
    for (const auto& [key, r] : latest) {
        TaskResult& t = by_task[key.first];
        t.task_id = key.first;
        ++t.n;
        if (r->pass_s) ++t.c_s;
        if (r->pass_f) ++t.c_f;
    }
    std::vector<TaskResult> out;
    for (const auto& id : order) out.push_back(by_task[id]);
    return out;
}

MetricsReport aggregate(const std::vector<TaskResult>& results, int scenario) {
    if (scenario < 1) throw DomainError("scenario must be at least 1");
    MetricsReport report;
    report.scenario = scenario;
    for (const auto& r : results) {
        if (r.n < scenario) {
            report.excluded.push_back(r.task_id);
            continue;
        }
        if (r.c_f > r.c_s || r.c_s > r.n || r.c_f < 0)
            throw DomainError("task " + r.task_id + ": counts violate 0 <= c_f <= c_s <= n");
        TaskMetrics m;
        m.counts = r;
        m.pass_s_1 = pass_at_k(r.n, r.c_s, 1);
        m.pass_s_k = pass_at_k(r.n, r.c_s, scenario);
        m.pass_f_1 = pass_at_k(r.n, r.c_f, 1);
        m.pass_f_k = pass_at_k(r.n, r.c_f, scenario);
        report.per_task.push_back(m);
    }
    if (report.per_task.empty()) throw EmptyInput("no task has at least " + std::to_string(scenario) + " samples");
    const double count = static_cast<double>(report.per_task.size());
    for (const auto& m : report.per_task) {
        report.pass_s_1 += m.pass_s_1 / count;
        report.pass_s_k += m.pass_s_k / count;
        report.pass_f_1 += m.pass_f_1 / count;
        report.pass_f_k += m.pass_f_k / count;
    }
    return report;
}

namespace {

std::string fixed4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

}  // namespace

std::string render_report(const MetricsReport& report, ReportFormat format, bool per_task) {
    const std::string k = std::to_string(report.scenario);
    const std::vector<std::string> header = {"scope", "pass_s@1", "pass_s@" + k, "pass_f@1", "pass_f@" + k};
    std::vector<std::vector<std::string>> rows;
    if (!report.per_task.empty()) {
        rows.push_back({"overall", fixed4(report.pass_s_1), fixed4(report.pass_s_k), fixed4(report.pass_f_1),
                        fixed4(report.pass_f_k)});
        if (per_task)
            for (const auto& m : report.per_task)
                rows.push_back({m.counts.task_id, fixed4(m.pass_s_1), fixed4(m.pass_s_k), fixed4(m.pass_f_1),
                                fixed4(m.pass_f_k)});
    }

    std::string out;
    if (format == ReportFormat::Csv) {
        auto line = [&](const std::vector<std::string>& cells) {
            for (std::size_t i = 0; i < cells.size(); ++i) {
                if (i) out += ',';
                out += cells[i];
            }
            out += '\n';
        };
        line(header);
        for (const auto& r : rows) line(r);
        return out;
    }
    auto line = [&](const std::vector<std::string>& cells) {
        out += '|';
        for (const auto& c : cells) out += " " + c + " |";
        out += '\n';
    };
    line(header);
    out += "|---|---:|---:|---:|---:|\n";
    for (const auto& r : rows) line(r);
    return out;
}

}  // namespace modigen
