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

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "csiclip/layers.hpp"

namespace csiclip {

struct GradCheckEntry {
    std::string name;
    double max_abs_error = 0.0;
    // max |analytic - numeric| over the tensor, divided by the larger of the
    // two gradients' max magnitudes (floored at 1e-6).
    double max_rel_error = 0.0;
    bool passed = true;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;

    double max_rel_error() const {
        double m = 0.0;
        for (const auto& e : entries) m = std::max(m, e.max_rel_error);
        return m;
    }
    bool passed() const {
        return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.passed; });
    }
};

// Compares the analytic gradients already stored in params[i]->grad against
// central differences of loss_fn with step 1e-5 * max(1, |theta|). loss_fn must
// evaluate the loss at the current parameter values without touching grads.
inline GradCheckReport gradient_check(const std::function<double()>& loss_fn,
                                      const ParamRefs<double>& params, double tolerance,
                                      double relative_step = 1e-5) {
    GradCheckReport report;
    for (Parameter<double>* p : params) {
        Eigen::MatrixXd numeric(p->value.rows(), p->value.cols());
        for (Index i = 0; i < p->value.size(); ++i) {
            double& theta = p->value.data()[i];
            const double saved = theta;
            const double h = relative_step * std::max(1.0, std::abs(saved));
            theta = saved + h;
            const double up = loss_fn();
            theta = saved - h;
            const double down = loss_fn();
            theta = saved;
            numeric.data()[i] = (up - down) / (2.0 * h);
        }
        GradCheckEntry e;
        e.name = p->name;
        if (p->value.size() > 0) {
            const double scale =
                std::max({p->grad.cwiseAbs().maxCoeff(), numeric.cwiseAbs().maxCoeff(), 1e-6});
            e.max_abs_error = (p->grad - numeric).cwiseAbs().maxCoeff();
            e.max_rel_error = e.max_abs_error / scale;
        }
        e.passed = e.max_rel_error < tolerance;
        report.entries.push_back(e);
    }
    return report;
}

}  // namespace csiclip
