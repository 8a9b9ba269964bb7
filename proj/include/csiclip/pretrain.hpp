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
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "csiclip/checkpoint.hpp"
#include "csiclip/datapipe.hpp"
#include "csiclip/layers.hpp"
#include "csiclip/optim.hpp"

namespace csiclip {

struct PretrainConfig {
    Index epochs = 300;
    Index batch_size = 128;
    AdamWConfig optimizer{};
    Index lr_patience = 10;
    double lr_factor = 0.8;
    Index early_stop_patience = 30;
    double init_temperature = 0.07;
    double min_temperature = 0.01;
    bool learn_temperature = true;
    bool symmetric = false;
    std::vector<Index> widths{16, 32, 64};
    Index embed_dim = 128;
};

EncoderConfig encoder_config(const LinkConfig& link, const std::vector<Index>& widths, Index embed_dim);

// Dual-encoder contrastive training state: f_theta encodes CSI, f_xi encodes CIR.
struct PretrainState {
    ConvEncoder<float> csi_encoder;
    ConvEncoder<float> cir_encoder;
    Parameter<float> log_temperature;
    AdamW<float> optimizer;
    PlateauSchedule schedule;
    std::mt19937_64 rng;
    Index epoch = 0;
    double best_val_loss = std::numeric_limits<double>::infinity();
    Index best_epoch = -1;
    std::vector<double> val_history;
    // Snapshot at the best validation loss.
    std::vector<Parameter<float>> best_csi_encoder;
    std::vector<Parameter<float>> best_cir_encoder;
    Mat<float> best_log_temperature;

    double temperature() const { return std::exp(static_cast<double>(log_temperature.value(0, 0))); }
    ParamRefs<float> trainable();
    // Copies the snapshot into the live model. No-op before the first validation.
    void restore_best();
};

PretrainState init_pretrain_state(const PretrainConfig& config, const EncoderConfig& encoder, std::uint64_t seed);

struct RetrievalResult {
    double accuracy = 0.0;
    bool degenerate = false;  // all similarities identical (collapsed embeddings)
};

// Fraction of rows whose largest similarity sits on the diagonal; ties break
// toward the lowest column index.
RetrievalResult retrieval_accuracy(const Eigen::MatrixXd& similarity);

struct PretrainMetrics {
    double loss = 0.0;
    double retrieval = 0.0;
    Index batches = 0;
    Index dropped = 0;  // samples dropped in size-1 tail batches
};

// One seeded-shuffle pass over `train`, stepping the optimizer once per batch.
PretrainMetrics pretrain_epoch(PretrainState& state, const Dataset& data, std::span<const Index> train,
                               Index batch_size, const PretrainConfig& config);

// Loss and in-batch retrieval over consecutive batches of `indices` (no
// updates). A temperature override > 0 replaces the learned one.
PretrainMetrics evaluate_pretrain(const PretrainState& state, const Dataset& data,
                                  std::span<const Index> indices, Index batch_size,
                                  const PretrainConfig& config, double temperature_override = 0.0);

// CSI embeddings of `indices` under the given encoder.
Eigen::MatrixXd embed(const ConvEncoder<float>& encoder, const Dataset& data, std::span<const Index> indices,
                      Modality m);

// Standard deviation of cos(z_i, z_j) over all pairs i < j.
double similarity_spread(const Eigen::MatrixXd& embeddings);

struct EpochRecord {
    Index epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double retrieval = 0.0;      // validation, batch = config.batch_size
    double lr = 0.0;
    double temperature = 0.0;
    std::string to_json() const;
};

// Trains on the manifest's training split until config.epochs or early
// stopping, validating on the manifest's validation split. `on_epoch`
// observes each record. Resumes from state.epoch.
void run_pretraining(PretrainState& state, const Dataset& data, const PretrainConfig& config,
                     const std::function<void(const EpochRecord&)>& on_epoch = {});

Checkpoint to_checkpoint(const PretrainState& state, const std::string& config_echo);
PretrainState from_checkpoint(const Checkpoint& ck, const PretrainConfig& config, const EncoderConfig& encoder);

}  // namespace csiclip
