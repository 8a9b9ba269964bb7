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

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "csiclip/layers.hpp"

namespace csiclip {

struct AdamWConfig {
    double learning_rate = 8e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.01;
};

// Adam with decoupled weight decay: p <- p - lr*wd*p - lr*mhat/(sqrt(vhat)+eps).
// Moments are keyed by parameter position in the list passed to step().
template <typename Scalar>
class AdamW {
public:
    AdamW() = default;
    explicit AdamW(AdamWConfig config) : config_(config), lr_(config.learning_rate) {}

    // Throws DivergenceError naming the first parameter with a non-finite
    // gradient; no parameter is modified in that case.
    void step(const ParamRefs<Scalar>& params);

    double learning_rate() const { return lr_; }
    void set_learning_rate(double lr) { lr_ = lr; }
    std::uint64_t step_count() const { return step_; }
    void set_step_count(std::uint64_t s) { step_ = s; }
    const AdamWConfig& config() const { return config_; }

    std::vector<Mat<Scalar>>& first_moments() { return m_; }
    std::vector<Mat<Scalar>>& second_moments() { return v_; }
    const std::vector<Mat<Scalar>>& first_moments() const { return m_; }
    const std::vector<Mat<Scalar>>& second_moments() const { return v_; }

private:
    AdamWConfig config_;
    double lr_ = 8e-4;
    std::uint64_t step_ = 0;
    std::vector<Mat<Scalar>> m_;
    std::vector<Mat<Scalar>> v_;
};

// Multiplies the learning rate by `factor` once `patience` consecutive epochs
// pass without a new minimal validation loss. The first epoch has no earlier
// minimum to improve on and counts toward patience.
struct PlateauSchedule {
    Index patience = 10;
    double factor = 0.8;
    double best = std::numeric_limits<double>::infinity();
    Index bad_epochs = 0;

    // Returns the learning rate to use from the next epoch on.
    double step(double validation_loss, double lr);
};

// True iff none of the last `patience` entries set a new minimum, i.e. the
// first occurrence of the minimum lies at least `patience` entries back.
bool early_stop_check(std::span<const double> history, Index patience);

extern template class AdamW<float>;
extern template class AdamW<double>;

}  // namespace csiclip
