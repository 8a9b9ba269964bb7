// Copyright 2026 The CSI-CLIP Workbench Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "csiclip/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <tuple>

#include <json.hpp>

namespace csiclip {

double median(std::vector<double> values) {
    if (values.empty()) throw ContractError("median of an empty list");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double report_metric(const RunRecord& r) {
    return std::isfinite(r.metrics.test_metric) ? r.metrics.test_metric : r.metrics.val_metric;
}

Report build_report(std::span<const RunRecord> records) {
    using Key = std::tuple<Index, std::uint64_t, bool>;
    const TaskKind order[] = {TaskKind::positioning, TaskKind::beam_management, TaskKind::channel_identification};
    Report report;
    for (TaskKind task : order) {
        std::map<Key, ReportRow> cells;
        for (const RunRecord& r : records) {
            if (r.task != task) continue;
            ReportRow& row = cells[Key{r.label_budget, r.seed, r.probe}];
            row.task = task;
            row.label_budget = r.label_budget;
            row.seed = r.seed;
            row.probe = r.probe;
            std::optional<double>& slot = r.init == InitMode::scratch ? row.scratch : row.pretrained;
            if (slot) {
                throw DataError("duplicate " + to_string(r.init) + " run for task " + to_string(task) + ", seed " +
                                std::to_string(r.seed) + ", labels " + std::to_string(r.label_budget));
            }
            slot = report_metric(r);
        }
        if (cells.empty()) continue;
        ReportSection sec;
        sec.task = task;
        sec.metric = task == TaskKind::positioning ? "mean_error_distance_m" : "top1_accuracy";
        std::vector<double> s, p;
        for (auto& [key, row] : cells) {
            if (row.scratch && row.pretrained) {
                row.improvement = improvement_report(*row.pretrained, *row.scratch, task);
                if (!row.probe) {
                    s.push_back(*row.scratch);
                    p.push_back(*row.pretrained);
                }
            }
            sec.rows.push_back(row);
        }
        sec.pairs = static_cast<Index>(s.size());
        if (!s.empty()) {
            sec.median_scratch = median(s);
            sec.median_pretrained = median(p);
            sec.median_improvement = improvement_report(*sec.median_pretrained, *sec.median_scratch, task);
        }
        report.sections.push_back(std::move(sec));
    }
    return report;
}

namespace {

nlohmann::json opt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

nlohmann::json opt(const std::optional<Improvement>& v) {
    if (!v) return nullptr;
    return {{"relative", v->relative}, {"absolute", v->absolute}};
}

std::string fmt(const std::optional<double>& v, bool percent) {
    if (!v) return "absent";
    char buf[32];
    std::snprintf(buf, sizeof buf, percent ? "%.2f%%" : "%.4f", percent ? 100.0 * *v : *v);
    return buf;
}

std::string fmt_signed(double v, bool percent) {
    char buf[32];
    std::snprintf(buf, sizeof buf, percent ? "%+.2f%%" : "%+.4f", percent ? 100.0 * v : v);
    return buf;
}

}  // namespace

std::string Report::to_json() const {
    nlohmann::json j;
    j["format"] = "csiclip-report";
    j["sections"] = nlohmann::json::array();
    for (const ReportSection& sec : sections) {
        nlohmann::json js;
        js["task"] = to_string(sec.task);
        js["metric"] = sec.metric;
        js["pairs"] = sec.pairs;
        js["median_scratch"] = opt(sec.median_scratch);
        js["median_pretrained"] = opt(sec.median_pretrained);
        js["median_improvement"] = opt(sec.median_improvement);
        js["rows"] = nlohmann::json::array();
        for (const ReportRow& r : sec.rows) {
            js["rows"].push_back({{"label_budget", r.label_budget},
                                  {"seed", r.seed},
                                  {"probe", r.probe},
                                  {"scratch", opt(r.scratch)},
                                  {"pretrained", opt(r.pretrained)},
                                  {"improvement", opt(r.improvement)}});
        }
        j["sections"].push_back(std::move(js));
    }
    return j.dump(2);
}

std::string Report::to_text() const {
    std::ostringstream out;
    for (const ReportSection& sec : sections) {
        const bool accuracy = sec.task != TaskKind::positioning;
        std::vector<std::vector<std::string>> table;
        table.push_back({"labels", "seed", "mode", "scratch", "pretrained", "improvement", "delta"});
        auto add = [&](std::string labels, std::string seed, std::string mode, const std::optional<double>& s,
                       const std::optional<double>& p, const std::optional<Improvement>& imp) {
            table.push_back({std::move(labels), std::move(seed), std::move(mode), fmt(s, accuracy), fmt(p, accuracy),
                             imp ? fmt_signed(imp->relative, true) : "absent",
                             imp ? fmt_signed(imp->absolute, accuracy) : "absent"});
        };
        for (const ReportRow& r : sec.rows) {
            add(r.label_budget == 0 ? "all" : std::to_string(r.label_budget), std::to_string(r.seed),
                r.probe ? "probe" : "full", r.scratch, r.pretrained, r.improvement);
        }
        add("median", "-", "full", sec.median_scratch, sec.median_pretrained, sec.median_improvement);

        std::vector<std::size_t> width(table.front().size(), 0);
        for (const auto& row : table) {
            for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
        }
        out << to_string(sec.task) << " (" << sec.metric << ", " << sec.pairs << " pairs)\n";
        for (std::size_t r = 0; r < table.size(); ++r) {
            for (std::size_t c = 0; c < table[r].size(); ++c) {
                const std::string& cell = table[r][c];
                if (c > 0) out << "  ";
                if (c < 3) {
                    out << cell << std::string(width[c] - cell.size(), ' ');
                } else {
                    out << std::string(width[c] - cell.size(), ' ') << cell;
                }
            }
            out << '\n';
            if (r == 0) {
                std::size_t total = 2 * (width.size() - 1);
                for (std::size_t w : width) total += w;
                out << std::string(total, '-') << '\n';
            }
        }
        out << '\n';
    }
    return out.str();
}

}  // namespace csiclip
