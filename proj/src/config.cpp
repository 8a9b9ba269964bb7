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

#include "csiclip/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

namespace csiclip {

using nlohmann::json;

namespace {

json yaml_to_json(const YAML::Node& node) {
    switch (node.Type()) {
        case YAML::NodeType::Null:
        case YAML::NodeType::Undefined:
            return nullptr;
        case YAML::NodeType::Sequence: {
            json a = json::array();
            for (const auto& item : node) a.push_back(yaml_to_json(item));
            return a;
        }
        case YAML::NodeType::Map: {
            json o = json::object();
            for (const auto& kv : node) o[kv.first.as<std::string>()] = yaml_to_json(kv.second);
            return o;
        }
        case YAML::NodeType::Scalar: {
            const std::string s = node.Scalar();
            if (node.Tag() == "!") return s;  // quoted
            if (s == "true" || s == "True") return true;
            if (s == "false" || s == "False") return false;
            if (s == "null" || s == "~") return nullptr;
            try {
                std::size_t pos = 0;
                const long long v = std::stoll(s, &pos);
                if (pos == s.size()) return v;
            } catch (...) {
            }
            try {
                std::size_t pos = 0;
                const double v = std::stod(s, &pos);
                if (pos == s.size()) return v;
            } catch (...) {
            }
            return s;
        }
    }
    return nullptr;
}

// Reads the keys of one config section and rejects keys nobody asked for.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_null() && !j_.is_object()) throw ConfigError("config section '" + path_ + "' must be a mapping");
    }

    bool has(const std::string& key) const { return j_.is_object() && j_.contains(key); }

    const json& raw(const std::string& key) {
        used_.insert(key);
        return j_.at(key);
    }

    template <typename T>
    void get(const std::string& key, T& out) {
        if (!has(key)) return;
        const json& v = raw(key);
        const std::string field = where(key);
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) throw ConfigError("config field '" + field + "' must be true or false");
            out = v.get<bool>();
        } else if constexpr (std::is_integral_v<T>) {
            if (v.is_number_integer()) {
                if constexpr (std::is_unsigned_v<T>) {
                    if (v.get<long long>() < 0) throw ConfigError("config field '" + field + "' must be >= 0");
                }
                out = static_cast<T>(v.get<long long>());
            } else if (v.is_number_float() && std::floor(v.get<double>()) == v.get<double>()) {
                out = static_cast<T>(v.get<double>());
            } else {
                throw ConfigError("config field '" + field + "' must be an integer");
            }
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) throw ConfigError("config field '" + field + "' must be a number");
            out = v.get<double>();
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) throw ConfigError("config field '" + field + "' must be a string");
            out = v.get<std::string>();
        } else if constexpr (std::is_same_v<T, std::vector<Index>>) {
            if (!v.is_array()) throw ConfigError("config field '" + field + "' must be a list of integers");
            out.clear();
            for (const auto& e : v) {
                if (!e.is_number_integer()) throw ConfigError("config field '" + field + "' must list integers");
                out.push_back(e.get<Index>());
            }
        } else if constexpr (std::is_same_v<T, Vector3d>) {
            if (!v.is_array() || v.size() != 3) throw ConfigError("config field '" + field + "' must be [x, y, z]");
            for (int i = 0; i < 3; ++i) {
                if (!v[i].is_number()) throw ConfigError("config field '" + field + "' must hold numbers");
                out(i) = v[i].get<double>();
            }
        } else {
            static_assert(sizeof(T) == 0, "unsupported config field type");
        }
    }

    std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    void finish() const {
        if (!j_.is_object()) return;
        for (const auto& [key, value] : j_.items()) {
            if (!used_.count(key)) throw ConfigError("unknown config field '" + where(key) + "'");
        }
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> used_;
};

ArrayGeometry array_from_json(const json& j, const std::string& path, ArrayGeometry g) {
    Section s(j, path);
    s.get("rows", g.rows);
    s.get("cols", g.cols);
    s.get("spacing", g.spacing);
    s.finish();
    return g;
}

json to_json(const ArrayGeometry& g) { return {{"rows", g.rows}, {"cols", g.cols}, {"spacing", g.spacing}}; }

json to_json(const AdamWConfig& c) {
    return {{"learning_rate", c.learning_rate}, {"beta1", c.beta1}, {"beta2", c.beta2},
            {"epsilon", c.epsilon}, {"weight_decay", c.weight_decay}};
}

void read_optimizer(Section& s, AdamWConfig& c) {
    s.get("learning_rate", c.learning_rate);
    s.get("beta1", c.beta1);
    s.get("beta2", c.beta2);
    s.get("epsilon", c.epsilon);
    s.get("weight_decay", c.weight_decay);
}

void validate_optimizer(const AdamWConfig& c, const std::string& where) {
    if (!(c.learning_rate >= 0.0)) throw ConfigError("config field '" + where + ".learning_rate' must be >= 0");
    if (!(c.beta1 >= 0.0 && c.beta1 < 1.0) || !(c.beta2 >= 0.0 && c.beta2 < 1.0)) {
        throw ConfigError("config fields '" + where + ".beta1/beta2' must lie in [0, 1)");
    }
    if (!(c.epsilon > 0.0)) throw ConfigError("config field '" + where + ".epsilon' must be positive");
    if (!(c.weight_decay >= 0.0)) throw ConfigError("config field '" + where + ".weight_decay' must be >= 0");
}

}  // namespace

json to_json(const LinkConfig& c) {
    return {{"bs_array", to_json(c.bs)},          {"ue_array", to_json(c.ue)},
            {"n_taps", c.n_taps},                 {"n_subcarriers", c.n_subcarriers},
            {"bandwidth_hz", c.bandwidth_hz},     {"codebook_size", c.n_beams}};
}

LinkConfig link_from_json(const json& j) {
    LinkConfig c;
    Section s(j, "link");
    if (s.has("bs_array")) c.bs = array_from_json(s.raw("bs_array"), "link.bs_array", c.bs);
    if (s.has("ue_array")) c.ue = array_from_json(s.raw("ue_array"), "link.ue_array", c.ue);
    s.get("n_taps", c.n_taps);
    s.get("n_subcarriers", c.n_subcarriers);
    s.get("bandwidth_hz", c.bandwidth_hz);
    s.get("codebook_size", c.n_beams);
    s.finish();
    return c;
}

json to_json(const ScenarioConfig& c) {
    return {{"name", c.name},
            {"id", c.id},
            {"bs_position", {c.bs_position.x(), c.bs_position.y(), c.bs_position.z()}},
            {"cell_radius", c.cell_radius},
            {"min_distance", c.min_distance},
            {"sector_half_angle", c.sector_half_angle},
            {"ue_height", c.ue_height},
            {"scatterer_max_height", c.scatterer_max_height},
            {"n_ue", c.n_ue},
            {"scatterers_min", c.scatterers_min},
            {"scatterers_max", c.scatterers_max},
            {"paths_min", c.paths_min},
            {"paths_max", c.paths_max},
            {"blockage_probability", c.blockage_probability},
            {"pathloss_exponent_los", c.pathloss_exponent_los},
            {"pathloss_exponent_nlos", c.pathloss_exponent_nlos}};
}

ScenarioConfig scenario_from_json(const json& j, const LinkConfig& link) {
    ScenarioConfig c;
    c.link = link;
    if (j.is_object() && j.contains("name") && j["name"].is_string()) c.name = j["name"].get<std::string>();
    Section named(j, "scenarios['" + c.name + "']");
    named.get("name", c.name);
    named.get("id", c.id);
    named.get("bs_position", c.bs_position);
    named.get("cell_radius", c.cell_radius);
    named.get("min_distance", c.min_distance);
    named.get("sector_half_angle", c.sector_half_angle);
    named.get("ue_height", c.ue_height);
    named.get("scatterer_max_height", c.scatterer_max_height);
    named.get("n_ue", c.n_ue);
    named.get("scatterers_min", c.scatterers_min);
    named.get("scatterers_max", c.scatterers_max);
    named.get("paths_min", c.paths_min);
    named.get("paths_max", c.paths_max);
    named.get("blockage_probability", c.blockage_probability);
    named.get("pathloss_exponent_los", c.pathloss_exponent_los);
    named.get("pathloss_exponent_nlos", c.pathloss_exponent_nlos);
    named.finish();
    return c;
}

json to_json(const WorkbenchConfig& c) {
    json scenarios = json::array();
    for (const auto& s : c.scenarios) scenarios.push_back(to_json(s));
    const PretrainConfig& p = c.pretrain;
    const FinetuneConfig& f = c.finetune;
    return {{"name", c.name},
            {"seed", c.seed},
            {"link", to_json(c.link)},
            {"dataset", {{"scenario_cap", c.dataset.scenario_cap}, {"train_fraction", c.dataset.train_fraction}}},
            {"scenarios", scenarios},
            {"pretrain",
             {{"epochs", p.epochs},
              {"batch_size", p.batch_size},
              {"optimizer", to_json(p.optimizer)},
              {"lr_patience", p.lr_patience},
              {"lr_factor", p.lr_factor},
              {"early_stop_patience", p.early_stop_patience},
              {"init_temperature", p.init_temperature},
              {"min_temperature", p.min_temperature},
              {"learn_temperature", p.learn_temperature},
              {"symmetric", p.symmetric},
              {"widths", p.widths},
              {"embed_dim", p.embed_dim}}},
            {"finetune",
             {{"epochs", f.epochs},
              {"batch_size", f.batch_size},
              {"optimizer", to_json(f.optimizer)},
              {"lr_patience", f.lr_patience},
              {"lr_factor", f.lr_factor},
              {"early_stop_patience", f.early_stop_patience},
              {"train_fraction", f.train_fraction},
              {"head_hidden", f.head_hidden},
              {"label_budget", f.label_budget},
              {"eval_pool", f.eval_pool},
              {"coord_dim", f.coord_dim}}}};
}

WorkbenchConfig config_from_json(const json& j) {
    WorkbenchConfig c;
    Section top(j, "");
    top.get("name", c.name);
    top.get("seed", c.seed);
    if (top.has("link")) c.link = link_from_json(top.raw("link"));
    if (top.has("dataset")) {
        Section s(top.raw("dataset"), "dataset");
        s.get("scenario_cap", c.dataset.scenario_cap);
        s.get("train_fraction", c.dataset.train_fraction);
        s.finish();
    }
    if (top.has("scenarios")) {
        const json& list = top.raw("scenarios");
        if (!list.is_array()) throw ConfigError("config field 'scenarios' must be a list");
        for (const auto& item : list) c.scenarios.push_back(scenario_from_json(item, c.link));
    }
    if (top.has("pretrain")) {
        PretrainConfig& p = c.pretrain;
        Section s(top.raw("pretrain"), "pretrain");
        s.get("epochs", p.epochs);
        s.get("batch_size", p.batch_size);
        if (s.has("optimizer")) {
            Section o(s.raw("optimizer"), "pretrain.optimizer");
            read_optimizer(o, p.optimizer);
            o.finish();
        }
        s.get("lr_patience", p.lr_patience);
        s.get("lr_factor", p.lr_factor);
        s.get("early_stop_patience", p.early_stop_patience);
        s.get("init_temperature", p.init_temperature);
        s.get("min_temperature", p.min_temperature);
        s.get("learn_temperature", p.learn_temperature);
        s.get("symmetric", p.symmetric);
        s.get("widths", p.widths);
        s.get("embed_dim", p.embed_dim);
        s.finish();
    }
    if (top.has("finetune")) {
        FinetuneConfig& f = c.finetune;
        Section s(top.raw("finetune"), "finetune");
        s.get("epochs", f.epochs);
        s.get("batch_size", f.batch_size);
        if (s.has("optimizer")) {
            Section o(s.raw("optimizer"), "finetune.optimizer");
            read_optimizer(o, f.optimizer);
            o.finish();
        }
        s.get("lr_patience", f.lr_patience);
        s.get("lr_factor", f.lr_factor);
        s.get("early_stop_patience", f.early_stop_patience);
        s.get("train_fraction", f.train_fraction);
        s.get("head_hidden", f.head_hidden);
        s.get("label_budget", f.label_budget);
        s.get("eval_pool", f.eval_pool);
        s.get("coord_dim", f.coord_dim);
        s.finish();
    }
    top.finish();
    c.validate();
    return c;
}

void WorkbenchConfig::validate() const {
    link.validate();
    if (scenarios.empty()) throw ConfigError("config field 'scenarios' must list at least one scenario");
    std::set<std::uint32_t> ids;
    for (const auto& s : scenarios) {
        s.validate();
        if (!ids.insert(s.id).second) {
            throw ConfigError("config field 'scenarios': duplicate id " + std::to_string(s.id));
        }
    }
    if (dataset.scenario_cap < 1) throw ConfigError("config field 'dataset.scenario_cap' must be > 0");
    if (!(dataset.train_fraction > 0.0 && dataset.train_fraction < 1.0)) {
        throw ConfigError("config field 'dataset.train_fraction' must lie in (0, 1)");
    }
    const PretrainConfig& p = pretrain;
    if (p.epochs < 0) throw ConfigError("config field 'pretrain.epochs' must be >= 0");
    if (p.batch_size < 2) throw ConfigError("config field 'pretrain.batch_size' must be >= 2");
    validate_optimizer(p.optimizer, "pretrain.optimizer");
    if (p.lr_patience < 1 || !(p.lr_factor > 0.0 && p.lr_factor <= 1.0)) {
        throw ConfigError("config fields 'pretrain.lr_patience/lr_factor' are out of range");
    }
    if (p.early_stop_patience < 1) throw ConfigError("config field 'pretrain.early_stop_patience' must be >= 1");
    if (!(p.min_temperature > 0.0) || !(p.init_temperature >= p.min_temperature)) {
        throw ConfigError("config field 'pretrain.init_temperature' must be >= min_temperature > 0");
    }
    encoder().validate();
    const FinetuneConfig& f = finetune;
    if (f.epochs < 0) throw ConfigError("config field 'finetune.epochs' must be >= 0");
    if (f.batch_size < 1) throw ConfigError("config field 'finetune.batch_size' must be >= 1");
    validate_optimizer(f.optimizer, "finetune.optimizer");
    if (f.lr_patience < 1 || !(f.lr_factor > 0.0 && f.lr_factor <= 1.0)) {
        throw ConfigError("config fields 'finetune.lr_patience/lr_factor' are out of range");
    }
    if (f.early_stop_patience < 1) throw ConfigError("config field 'finetune.early_stop_patience' must be >= 1");
    if (!(f.train_fraction > 0.0 && f.train_fraction < 1.0)) {
        throw ConfigError("config field 'finetune.train_fraction' must lie in (0, 1)");
    }
    if (f.head_hidden < 1) throw ConfigError("config field 'finetune.head_hidden' must be > 0");
    if (f.label_budget < 0 || f.eval_pool < 0) {
        throw ConfigError("config fields 'finetune.label_budget/eval_pool' must be >= 0");
    }
    if (f.coord_dim != 2 && f.coord_dim != 3) throw ConfigError("config field 'finetune.coord_dim' must be 2 or 3");
}

std::string WorkbenchConfig::echo() const { return to_json(*this).dump(2); }

WorkbenchConfig parse_config(const std::string& yaml_text) {
    YAML::Node root;
    try {
        root = YAML::Load(yaml_text);
    } catch (const YAML::Exception& e) {
        throw ConfigError(std::string("config is not valid YAML: ") + e.what());
    }
    WorkbenchConfig c = config_from_json(yaml_to_json(root));
    return c;
}

WorkbenchConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

Dataset generate_dataset(const WorkbenchConfig& config) {
    config.validate();
    std::vector<std::vector<ChannelSample>> generated;
    std::vector<Index> sizes;
    for (std::size_t s = 0; s < config.scenarios.size(); ++s) {
        generated.push_back(generate_scenario(config.scenarios[s], derive_seed(derive_seed(config.seed, 1), s)));
        sizes.push_back(static_cast<Index>(generated.back().size()));
    }
    const std::vector<std::vector<Index>> keep =
        stratified_cap(sizes, config.dataset.scenario_cap, derive_seed(config.seed, 2));

    DatasetManifest manifest;
    manifest.name = config.name;
    manifest.generation_seed = config.seed;
    manifest.link = config.link;
    manifest.scenario_cap = config.dataset.scenario_cap;
    manifest.split_fraction = config.dataset.train_fraction;
    manifest.split_seed = derive_seed(config.seed, 3);
    std::vector<ChannelSample> samples;
    for (std::size_t s = 0; s < generated.size(); ++s) {
        manifest.scenarios.push_back({config.scenarios[s], sizes[s], static_cast<Index>(keep[s].size())});
        for (Index i : keep[s]) samples.push_back(std::move(generated[s][static_cast<std::size_t>(i)]));
    }
    return Dataset::create(std::move(samples), std::move(manifest));
}

}  // namespace csiclip
