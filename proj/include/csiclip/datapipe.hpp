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
#include <span>
#include <string>
#include <vector>

#include "csiclip/chanmodel.hpp"
#include "csiclip/layers.hpp"
#include "csiclip/sigproc.hpp"

namespace csiclip {

inline constexpr char kManifestFile[] = "manifest.json";
inline constexpr char kRecordsFile[] = "records.bin";

struct ScenarioEntry {
    ScenarioConfig config;
    Index generated = 0;  // samples produced by the generator
    Index selected = 0;   // samples kept after capping
};

struct DatasetManifest {
    static constexpr int kFormatVersion = 1;

    std::string name;
    std::uint64_t generation_seed = 0;
    LinkConfig link;
    std::vector<ScenarioEntry> scenarios;
    Index scenario_cap = 0;
    Index record_count = 0;

    double split_fraction = 0.8;
    std::uint64_t split_seed = 0;
    std::vector<std::uint8_t> is_train;  // per record

    NormStats csi_stats;
    NormStats cir_stats;
    std::uint32_t records_crc32 = 0;
    std::uint64_t records_bytes = 0;

    const NormStats& stats(Modality m) const { return m == Modality::csi ? csi_stats : cir_stats; }
    std::vector<Index> train_indices() const;
    std::vector<Index> val_indices() const;

    std::string to_json() const;
    static DatasetManifest from_json(const std::string& text);
};

// Record layout (little-endian):
//   u32 scenario_id | f64 x3 ue_position | u8 los_label | u16 beam_label | u16 n_paths
//   | n_paths x { f32 gain_re | f32 gain_im | u16 delay_tap | f32 aod_az | f32 aod_el
//                | f32 aoa_az | f32 aoa_el | u8 is_los }
//   | n_rx*n_tx*n_taps x { f32 re | f32 im }   (rx-major, then tx, then tap)
inline constexpr std::size_t kRecordHeaderBytes = 4 + 3 * 8 + 1 + 2 + 2;
inline constexpr std::size_t kPathBytes = 4 + 4 + 2 + 4 * 4 + 1;

std::size_t record_size(Index n_paths, Index n_pairs, Index n_taps);

// Seeded uniform shuffle; floor(n * fraction) records become training records.
std::vector<std::uint8_t> split_dataset(Index n, double fraction, std::uint64_t seed);

// min(size, cap) per scenario.
std::vector<Index> stratified_counts(std::span<const Index> sizes, Index cap);

// Per scenario, the selected sample indices (ascending), drawn uniformly
// without replacement when the scenario exceeds the cap.
std::vector<std::vector<Index>> stratified_cap(std::span<const Index> sizes, Index cap, std::uint64_t seed);

// Labels attached to a batch.
struct BatchLabels {
    std::vector<Index> los;           // 1 = LoS
    std::vector<Index> beam;
    Eigen::MatrixXd positions;        // n x 3, meters
};

struct Batch {
    InputBatch<float> input;
    BatchLabels labels;
};

class Dataset {
public:
    // Builds the in-memory dataset: quantizes CIRs to float32, splits with
    // (split_fraction, split_seed) and fits normalization on the training split.
    static Dataset create(std::vector<ChannelSample> samples, DatasetManifest manifest);

    // Reads manifest + records, validating checksum and layout.
    static Dataset load(const std::filesystem::path& dir);

    const DatasetManifest& manifest() const { return manifest_; }
    Index size() const { return static_cast<Index>(samples_.size()); }
    const ChannelSample& sample(Index i) const { return samples_.at(static_cast<std::size_t>(i)); }
    const std::vector<ChannelSample>& samples() const { return samples_; }
    const CIRTensor& cir(Index i) const { return cirs_.at(static_cast<std::size_t>(i)); }
    CSITensor csi(Index i) const;

    Index n_pairs() const { return manifest_.link.bs.size() * manifest_.link.ue.size(); }
    Index n_bins() const { return manifest_.link.n_subcarriers; }

    // Shaped, unnormalized encoder input. noise_std > 0 adds complex Gaussian
    // noise (per-component std noise_std / sqrt(2)) drawn from
    // derive_seed(noise_seed, i).
    ModelInput raw_input(Index i, Modality m, double noise_std = 0.0, std::uint64_t noise_seed = 0) const;

    // Normalization statistics over `indices`, which must all be training records.
    NormStats fit_stats(std::span<const Index> indices, Modality m) const;

    // Normalized batch with labels, [n, 2, n_pairs, n_bins] in channels-last layout.
    Batch load_batch(std::span<const Index> indices, Modality m, double noise_std = 0.0,
                     std::uint64_t noise_seed = 0) const;

    // Caches the noise-free normalized inputs of one modality for fast batching.
    void precompute(Modality m);

    // Replaces the split and refits both modalities' statistics.
    void resplit(double fraction, std::uint64_t seed);

    std::vector<char> serialize_records() const;
    void write(const std::filesystem::path& manifest_path, const std::filesystem::path& records_path) const;
    void write(const std::filesystem::path& dir) const;

private:
    DatasetManifest manifest_;
    std::vector<ChannelSample> samples_;
    std::vector<CIRTensor> cirs_;
    std::vector<Mat<float>> cache_[2];
};

}  // namespace csiclip
