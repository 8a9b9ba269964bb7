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
#include <map>
#include <string>
#include <vector>

#include "csiclip/layers.hpp"
#include "csiclip/optim.hpp"

namespace csiclip {

// Versioned binary container:
//
//   "CSICLIPK" | u32 version | str kind | str config_echo | u64 epoch | str rng_state
//   | u32 n_scalars  { str name | f64 value }
//   | u32 n_tensors  { str name | u32 rows | u32 cols | f32[rows*cols] row-major }
//   | u32 crc32 of everything before it
//
// str = u32 byte length + UTF-8 bytes. All fields little-endian.
struct Checkpoint {
    static constexpr std::uint32_t kVersion = 1;

    struct Tensor {
        std::string name;
        Mat<float> value;
    };

    std::string kind;
    std::string config_echo;
    std::uint64_t epoch = 0;
    std::string rng_state;
    std::map<std::string, double> scalars;
    std::vector<Tensor> tensors;

    void add_tensor(const std::string& name, const Mat<float>& value);
    bool has_tensor(const std::string& name) const;
    const Mat<float>& tensor(const std::string& name) const;
    double scalar(const std::string& name) const;

    // Stores every parameter as "<prefix><name>".
    void add_parameters(const std::string& prefix, const std::vector<Parameter<float>>& params);
    // Restores values by name; shapes must match exactly.
    void load_parameters(const std::string& prefix, std::vector<Parameter<float>>& params) const;

    // Optimizer step count, learning rate and moments ("<prefix>m/<i>", "<prefix>v/<i>").
    void add_optimizer(const std::string& prefix, const AdamW<float>& opt);
    void load_optimizer(const std::string& prefix, AdamW<float>& opt) const;

    std::vector<char> serialize() const;
    static Checkpoint deserialize(const std::vector<char>& bytes);

    void save(const std::filesystem::path& path) const;
    static Checkpoint load(const std::filesystem::path& path);
};

}  // namespace csiclip
