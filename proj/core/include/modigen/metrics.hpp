// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "modigen/validate.hpp"

namespace modigen {

/// Unbiased pass@k estimator 1 - C(n-c, k) / C(n, k), in product form.
/// Throws DomainError unless 1 <= k <= n and 0 <= c <= n.
double pass_at_k(int n, int c, int k);

struct TaskResult {
    std::string task_id;
    int n = 0;
    int c_s = 0;
    int c_f = 0;

    bool operator==(const TaskResult&) const = default;
};

struct TaskMetrics {
    TaskResult counts;
    double pass_s_1 = 0, pass_s_k = 0, pass_f_1 = 0, pass_f_k = 0;
};

struct MetricsReport {
    int scenario = 1;
    double pass_s_1 = 0, pass_s_k = 0, pass_f_1 = 0, pass_f_k = 0;
    std::vector<TaskMetrics> per_task;
    std::vector<std::string> excluded;  // tasks with n < scenario
};

/// Per-task counts from reports, keeping only the latest round of each (task, sample).
/// Tasks appear in order of first occurrence.
std::vector<TaskResult> task_results(const std::vector<ValidationReport>& reports);

/// Mean of per-task estimates at k = 1 and k = scenario. Tasks with n < scenario are
/// excluded (listed in `excluded`). Throws EmptyInput when nothing remains.
MetricsReport aggregate(const std::vector<TaskResult>& results, int scenario);

enum class ReportFormat { Csv, Markdown };

/// Columns scope, pass_s@1, pass_s@K, pass_f@1, pass_f@K with 4 decimals. An "overall"
/// row follows the header when the report covers at least one task, then per-task rows.
std::string render_report(const MetricsReport& report, ReportFormat format, bool per_task = false);

}  // namespace modigen
