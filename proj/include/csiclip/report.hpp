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

#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "csiclip/finetune.hpp"

namespace csiclip {

// One (task, label budget, seed, probe) cell pairing a scratch and a
// pretrained run. Either side may be absent.
struct ReportRow {
    TaskKind task = TaskKind::positioning;
    Index label_budget = 0;
    std::uint64_t seed = 0;
    bool probe = false;
    std::optional<double> scratch;
    std::optional<double> pretrained;
    std::optional<Improvement> improvement;
};

struct ReportSection {
    TaskKind task = TaskKind::positioning;
    std::string metric;
    std::vector<ReportRow> rows;
    // Medians over complete pairs only.
    std::optional<double> median_scratch;
    std::optional<double> median_pretrained;
    std::optional<Improvement> median_improvement;
    Index pairs = 0;
};

struct Report {
    std::vector<ReportSection> sections;  // positioning, beam management, channel identification

    std::string to_json() const;
    std::string to_text() const;
};

// Metric reported for a run: the held-out pool when it was scored, else validation.
double report_metric(const RunRecord& r);

// Throws DataError when two records claim the same cell and init mode.
Report build_report(std::span<const RunRecord> records);

double median(std::vector<double> values);

}  // namespace csiclip
