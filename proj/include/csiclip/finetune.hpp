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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "csiclip/checkpoint.hpp"
#include "csiclip/datapipe.hpp"
#include "csiclip/layers.hpp"
#include "csiclip/optim.hpp"

namespace csiclip {

enum class TaskKind { channel_identification, positioning, beam_management };

std::string to_string(TaskKind k);
TaskKind task_from_string(const std::string& s);

struct TaskSpec {
    TaskKind kind = TaskKind::positioning;
    Index output_size = 2;

    bool is_classification() const { return kind != TaskKind::positioning; }
    static TaskSpec make(TaskKind kind, const LinkConfig& link, Index coord_dim);
};

enum class InitMode { pretrained, scratch };
std::string to_string(InitMode m);

struct FinetuneConfig {
    Index epochs = 60;
    Index batch_size = 32;
    AdamWConfig optimizer{};
    Index lr_patience = 10;
    double lr_factor = 0.8;
    Index early_stop_patience = 30;
    double train_fraction = 0.8;
    Index head_hidden = 64;
    Index label_budget = 0;  // 0 = every record
    Index eval_pool = 1000;  // held-out records scored after training (0 = none)
    Index coord_dim = 2;
};

struct FinetuneRun {
    InitMode init = InitMode::scratch;
    TaskSpec task;
    std::uint64_t seed = 0;
    bool freeze_encoder = false;
    ConvEncoder<float> encoder;
    TaskHead<float> head;
    AdamW<float> optimizer;
    PlateauSchedule schedule;

    std::vector<Index> train;  // labeled training records
    std::vector<Index> val;    // labeled validation records
    std::vector<Index> test;   // held-out pool outside the label budget

    Eigen::RowVectorXd target_mean;  // positioning target standardization
    Eigen::RowVectorXd target_std;

    ParamRefs<float> trainable();
};

struct FinetuneMetrics {
    Index best_epoch = -1;
    double best_val_loss = 0.0;
    double val_metric = 0.0;   // meters (positioning) or top-1 accuracy
    double test_metric = 0.0;
    double init_val_metric = 0.0;
    std::vector<double> train_loss;
    std::vector<double> val_loss;
    std::vector<double> val_metric_history;
};

// Pretrained mode loads the best CSI encoder from `pretrained`; scratch mode
// draws a fresh encoder. Head init, label-budget subset, splits and data
// order depend only on `seed`, never on the init mode.
FinetuneRun make_run(const Dataset& data, TaskKind kind, InitMode init, const Checkpoint* pretrained,
                     std::uint64_t seed, const FinetuneConfig& config, const EncoderConfig& encoder);

// Trains for `epochs`, keeps the parameters of the epoch with minimal
// validation loss and reports metrics from them.
FinetuneMetrics finetune(FinetuneRun& run, const Dataset& data, Index epochs, const FinetuneConfig& config);

// Frozen-encoder variant of finetune.
FinetuneMetrics linear_probe(FinetuneRun& run, const Dataset& data, Index epochs, const FinetuneConfig& config);

// Raw head outputs for `indices` (positioning outputs are un-standardized meters).
Eigen::MatrixXd predict(const FinetuneRun& run, const Dataset& data, std::span<const Index> indices);

double evaluate_positioning(const FinetuneRun& run, const Dataset& data, std::span<const Index> indices);
double evaluate_classification(const FinetuneRun& run, const Dataset& data, std::span<const Index> indices);
double validation_loss(const FinetuneRun& run, const Dataset& data, std::span<const Index> indices);

// Mean Euclidean distance between rows.
double mean_error_distance(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth);
// Fraction of rows whose argmax (lowest index on ties) equals the label.
double classification_accuracy(const Eigen::MatrixXd& logits, std::span<const Index> labels);

struct Improvement {
    double relative = 0.0;  // positive = pretrained better
    double absolute = 0.0;  // pretrained minus scratch for accuracy, scratch minus pretrained for error
};

// Positioning: (scratch - pretrained) / scratch. Classification: (pretrained - scratch) / scratch.
Improvement improvement_report(double pretrained_metric, double scratch_metric, TaskKind kind);

// Metrics record persisted next to a fine-tuned checkpoint.
struct RunRecord {
    TaskKind task = TaskKind::positioning;
    InitMode init = InitMode::scratch;
    bool probe = false;
    std::uint64_t seed = 0;
    Index label_budget = 0;
    Index epochs = 0;
    FinetuneMetrics metrics;
    std::string metric_name() const;

    std::string to_json() const;
    static RunRecord from_json(const std::string& text);
};

inline constexpr char kRunMetricsFile[] = "metrics.json";
inline constexpr char kRunCheckpointFile[] = "run.ckpt";

void save_run(const std::filesystem::path& dir, const FinetuneRun& run, const RunRecord& record,
              const std::string& config_echo);
RunRecord load_run_record(const std::filesystem::path& dir);

}  // namespace csiclip
