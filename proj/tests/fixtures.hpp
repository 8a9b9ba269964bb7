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

#include <filesystem>
#include <string>

#include "csiclip/config.hpp"

namespace fixtures {

inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto p = std::filesystem::temp_directory_path() / ("csiclip_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

// Small enough for unit tests to train in a few seconds.
inline csiclip::WorkbenchConfig tiny_config(csiclip::Index n_ue = 120, std::uint64_t seed = 7) {
    using namespace csiclip;
    WorkbenchConfig c;
    c.name = "tiny";
    c.seed = seed;
    c.link.bs = {2, 2, 0.5};
    c.link.ue = {1, 1, 0.5};
    c.link.n_taps = 16;
    c.link.n_subcarriers = 16;
    c.link.n_beams = 4;
    c.dataset.scenario_cap = n_ue;
    c.dataset.train_fraction = 0.8;
    for (std::uint32_t s = 0; s < 2; ++s) {
        ScenarioConfig sc;
        sc.name = "s" + std::to_string(s);
        sc.id = s;
        sc.link = c.link;
        sc.n_ue = n_ue / 2;
        sc.cell_radius = 60.0 + 30.0 * s;
        sc.blockage_probability = 0.5;
        c.scenarios.push_back(sc);
    }
    c.pretrain.batch_size = 16;
    c.pretrain.widths = {4, 8};
    c.pretrain.embed_dim = 16;
    c.pretrain.optimizer.learning_rate = 3e-3;
    c.finetune.batch_size = 16;
    c.finetune.head_hidden = 16;
    c.finetune.eval_pool = 0;
    c.validate();
    return c;
}

}  // namespace fixtures
