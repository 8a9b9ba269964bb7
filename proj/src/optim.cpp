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

#include "csiclip/optim.hpp"

#include <cmath>

namespace csiclip {

template <typename Scalar>
void AdamW<Scalar>::step(const ParamRefs<Scalar>& params) {
    for (const auto* p : params) {
        if (!p->grad.allFinite()) throw DivergenceError("non-finite gradient in parameter '" + p->name + "'");
    }
    if (m_.size() != params.size()) {
        m_.clear();
        v_.clear();
        for (const auto* p : params) {
            m_.push_back(Mat<Scalar>::Zero(p->value.rows(), p->value.cols()));
            v_.push_back(Mat<Scalar>::Zero(p->value.rows(), p->value.cols()));
        }
    }
    ++step_;
    const double t = static_cast<double>(step_);
    const auto b1 = static_cast<Scalar>(config_.beta1);
    const auto b2 = static_cast<Scalar>(config_.beta2);
    const auto c1 = static_cast<Scalar>(1.0 / (1.0 - std::pow(config_.beta1, t)));
    const auto c2 = static_cast<Scalar>(1.0 / (1.0 - std::pow(config_.beta2, t)));
    const auto lr = static_cast<Scalar>(lr_);
    const auto eps = static_cast<Scalar>(config_.epsilon);
    const auto shrink = static_cast<Scalar>(1.0 - lr_ * config_.weight_decay);
    for (std::size_t i = 0; i < params.size(); ++i) {
        Parameter<Scalar>& p = *params[i];
        m_[i] = b1 * m_[i] + (Scalar(1) - b1) * p.grad;
        v_[i] = b2 * v_[i] + (Scalar(1) - b2) * p.grad.cwiseAbs2();
        if (p.decay && config_.weight_decay != 0.0) p.value *= shrink;
        p.value.array() -= lr * (m_[i].array() * c1) / ((v_[i].array() * c2).sqrt() + eps);
    }
}

double PlateauSchedule::step(double validation_loss, double lr) {
    const bool improved = std::isfinite(best) && validation_loss < best;
    if (validation_loss < best) best = validation_loss;
    bad_epochs = improved ? 0 : bad_epochs + 1;
    if (bad_epochs >= patience) {
        bad_epochs = 0;
        return lr * factor;
    }
    return lr;
}

bool early_stop_check(std::span<const double> history, Index patience) {
    if (history.empty()) throw ContractError("early_stop_check: empty history");
    std::size_t best = 0;
    for (std::size_t i = 1; i < history.size(); ++i) {
        if (history[i] < history[best]) best = i;
    }
    return static_cast<Index>(history.size() - 1 - best) >= patience;
}

template class AdamW<float>;
template class AdamW<double>;

}  // namespace csiclip
