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
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "csiclip/chanmodel.hpp"
#include "csiclip/datapipe.hpp"
#include "csiclip/finetune.hpp"
#include "csiclip/pretrain.hpp"

namespace csiclip {

struct DatasetConfig {
    Index scenario_cap = 5000;
    double train_fraction = 0.9;
};

// Everything a command needs, loaded from one YAML (or JSON) file. Unknown
// keys are rejected; omitted keys keep the defaults below.
struct WorkbenchConfig {
    std::string name = "workbench";
    std::uint64_t seed = 0;
    LinkConfig link;
    DatasetConfig dataset;
    std::vector<ScenarioConfig> scenarios;
    PretrainConfig pretrain;
    FinetuneConfig finetune;

    void validate() const;
    EncoderConfig encoder() const { return encoder_config(link, pretrain.widths, pretrain.embed_dim); }

    // Complete JSON echo; JSON is valid YAML, so the echo loads back as a config.
    std::string echo() const;
};

WorkbenchConfig parse_config(const std::string& yaml_text);
WorkbenchConfig load_config(const std::filesystem::path& path);

nlohmann::json to_json(const LinkConfig& c);
nlohmann::json to_json(const ScenarioConfig& c);
nlohmann::json to_json(const WorkbenchConfig& c);
LinkConfig link_from_json(const nlohmann::json& j);
ScenarioConfig scenario_from_json(const nlohmann::json& j, const LinkConfig& link);
WorkbenchConfig config_from_json(const nlohmann::json& j);

// Generates every scenario, caps each at dataset.scenario_cap, concatenates
// them in config order and splits with dataset.train_fraction.
Dataset generate_dataset(const WorkbenchConfig& config);

}  // namespace csiclip
