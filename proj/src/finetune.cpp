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

#include "csiclip/finetune.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <json.hpp>

#include "binio.hpp"
#include "csiclip/losses.hpp"

namespace csiclip {

std::string to_string(TaskKind k) {
    switch (k) {
        case TaskKind::channel_identification: return "channel_identification";
        case TaskKind::positioning: return "positioning";
        case TaskKind::beam_management: return "beam_management";
    }
    return "unknown";
}

TaskKind task_from_string(const std::string& s) {
    if (s == "channel_identification" || s == "ci") return TaskKind::channel_identification;
    if (s == "positioning" || s == "pos") return TaskKind::positioning;
    if (s == "beam_management" || s == "bm") return TaskKind::beam_management;
    throw ConfigError("unknown task '" + s + "' (expected positioning, beam_management or channel_identification)");
}

std::string to_string(InitMode m) { return m == InitMode::pretrained ? "pretrained" : "scratch"; }

TaskSpec TaskSpec::make(TaskKind kind, const LinkConfig& link, Index coord_dim) {
    TaskSpec t;
    t.kind = kind;
    switch (kind) {
        case TaskKind::channel_identification: t.output_size = 2; break;
        case TaskKind::beam_management: t.output_size = link.n_beams; break;
        case TaskKind::positioning:
            if (coord_dim != 2 && coord_dim != 3) throw ConfigError("finetune.coord_dim must be 2 or 3");
            t.output_size = coord_dim;
            break;
    }
    return t;
}

ParamRefs<float> FinetuneRun::trainable() {
    ParamRefs<float> refs;
    if (!freeze_encoder) refs = encoder.refs();
    for (auto* p : head.refs()) refs.push_back(p);
    return refs;
}

namespace {

constexpr char kEncoderPrefix[] = "encoder/";
constexpr char kHeadPrefix[] = "head/";

Eigen::MatrixXd positions_of(const Dataset& data, std::span<const Index> idx, Index dim) {
    Eigen::MatrixXd p(static_cast<Index>(idx.size()), dim);
    for (std::size_t r = 0; r < idx.size(); ++r) {
        const Vector3d& u = data.sample(idx[r]).ue_position;
        for (Index c = 0; c < dim; ++c) p(static_cast<Index>(r), c) = u(c);
    }
    return p;
}

std::vector<Index> class_labels(const Dataset& data, std::span<const Index> idx, TaskKind kind) {
    std::vector<Index> out;
    out.reserve(idx.size());
    for (Index i : idx) {
        const ChannelSample& s = data.sample(i);
        out.push_back(kind == TaskKind::beam_management ? static_cast<Index>(s.beam_label)
                                                        : static_cast<Index>(s.los_label));
    }
    return out;
}

Mat<float> head_output(const FinetuneRun& run, const Dataset& data, std::span<const Index> idx) {
    const Batch b = data.load_batch(idx, Modality::csi);
    return run.head.forward(run.encoder.forward(b.input));
}

// Loss and gradient of the head output for one batch.
LossResult task_loss(const FinetuneRun& run, const Dataset& data, std::span<const Index> idx,
                     const Eigen::MatrixXd& out) {
    if (run.task.is_classification()) return cross_entropy_loss(out, class_labels(data, idx, run.task.kind));
    Eigen::MatrixXd target = positions_of(data, idx, run.task.output_size);
    target = (target.rowwise() - run.target_mean).array().rowwise() / run.target_std.array();
    return mse_loss(out, target);
}

double metric_of(const FinetuneRun& run, const Dataset& data, std::span<const Index> idx) {
    if (idx.empty()) return std::numeric_limits<double>::quiet_NaN();
    return run.task.is_classification() ? evaluate_classification(run, data, idx)
                                        : evaluate_positioning(run, data, idx);
}

FinetuneMetrics train_run(FinetuneRun& run, const Dataset& data, Index epochs, const FinetuneConfig& config) {
    if (run.train.empty() || run.val.empty()) throw DataError("fine-tuning needs non-empty train and validation splits");
    if (config.batch_size < 1) throw ConfigError("finetune.batch_size must be >= 1");
    FinetuneMetrics m;
    m.init_val_metric = metric_of(run, data, run.val);
    std::mt19937_64 order_rng(derive_seed(run.seed, 3));
    std::vector<Index> order = run.train;

    double best = std::numeric_limits<double>::infinity();
    std::vector<Parameter<float>> best_encoder = run.encoder.parameters();
    std::vector<Parameter<float>> best_head = run.head.parameters();
    const auto bs = static_cast<std::size_t>(config.batch_size);

    for (Index epoch = 0; epoch < epochs; ++epoch) {
        if (!m.val_loss.empty() && early_stop_check(m.val_loss, config.early_stop_patience)) break;
        std::shuffle(order.begin(), order.end(), order_rng);
        double train_loss = 0.0;
        Index batches = 0;
        const ParamRefs<float> params = run.trainable();
        for (std::size_t start = 0; start < order.size(); start += bs) {
            const std::span<const Index> idx(order.data() + start, std::min(order.size(), start + bs) - start);
            const Batch b = data.load_batch(idx, Modality::csi);
            ConvEncoder<float>::Cache enc_cache;
            TaskHead<float>::Cache head_cache;
            const Mat<float> z = run.encoder.forward(b.input, run.freeze_encoder ? nullptr : &enc_cache);
            const Mat<float> out = run.head.forward(z, &head_cache);
            const LossResult l = task_loss(run, data, idx, out.cast<double>());
            if (!std::isfinite(l.loss)) throw DivergenceError("fine-tuning loss became non-finite");
            zero_grad(params);
            const Mat<float> dz = run.head.backward(head_cache, l.grad.cast<float>());
            if (!run.freeze_encoder) run.encoder.backward(enc_cache, dz);
            run.optimizer.step(params);
            train_loss += l.loss;
            ++batches;
        }
        const double vl = validation_loss(run, data, run.val);
        m.train_loss.push_back(train_loss / static_cast<double>(batches));
        m.val_loss.push_back(vl);
        m.val_metric_history.push_back(metric_of(run, data, run.val));
        if (vl < best) {
            best = vl;
            m.best_epoch = epoch + 1;
            best_encoder = run.encoder.parameters();
            best_head = run.head.parameters();
        }
        run.optimizer.set_learning_rate(run.schedule.step(vl, run.optimizer.learning_rate()));
    }
    if (m.best_epoch > 0) {
        copy_values(run.encoder.parameters(), best_encoder);
        copy_values(run.head.parameters(), best_head);
        m.best_val_loss = best;
    } else {
        m.best_epoch = 0;
        m.best_val_loss = validation_loss(run, data, run.val);
    }
    m.val_metric = metric_of(run, data, run.val);
    m.test_metric = metric_of(run, data, run.test);
    return m;
}

}  // namespace

FinetuneRun make_run(const Dataset& data, TaskKind kind, InitMode init, const Checkpoint* pretrained,
                     std::uint64_t seed, const FinetuneConfig& config, const EncoderConfig& encoder) {
    FinetuneRun run;
    run.init = init;
    run.task = TaskSpec::make(kind, data.manifest().link, config.coord_dim);
    run.seed = seed;

    const Index n = data.size();
    const Index budget = config.label_budget > 0 ? config.label_budget : n;
    if (budget > n) {
        throw DataError("label budget " + std::to_string(budget) + " exceeds the " + std::to_string(n) +
                        " available labeled records");
    }
    if (budget < 2) throw DataError("label budget must cover at least two records");
    if (config.train_fraction <= 0.0 || config.train_fraction >= 1.0) {
        throw ConfigError("finetune.train_fraction must lie in (0, 1)");
    }

    std::vector<Index> all(static_cast<std::size_t>(n));
    std::iota(all.begin(), all.end(), Index{0});
    std::mt19937_64 subset_rng(derive_seed(seed, 5));
    std::shuffle(all.begin(), all.end(), subset_rng);
    const std::vector<Index> labeled(all.begin(), all.begin() + budget);
    const Index pool = std::min<Index>(n - budget, config.eval_pool);
    run.test.assign(all.begin() + budget, all.begin() + budget + pool);
    std::sort(run.test.begin(), run.test.end());

    const std::vector<std::uint8_t> is_train = split_dataset(budget, config.train_fraction, derive_seed(seed, 4));
    for (Index i = 0; i < budget; ++i) {
        (is_train[static_cast<std::size_t>(i)] ? run.train : run.val).push_back(labeled[static_cast<std::size_t>(i)]);
    }
    if (run.train.empty() || run.val.empty()) {
        throw DataError("label budget " + std::to_string(budget) + " leaves an empty train or validation split");
    }

    if (init == InitMode::pretrained) {
        if (pretrained == nullptr) throw ContractError("pretrained init requires a checkpoint");
        run.encoder = ConvEncoder<float>(encoder, derive_seed(seed, 2));
        const std::string first = run.encoder.parameters().front().name;
        const std::string prefix =
            pretrained->has_tensor("best/csi_encoder/" + first) ? "best/csi_encoder/" : "csi_encoder/";
        pretrained->load_parameters(prefix, run.encoder.parameters());
    } else {
        run.encoder = ConvEncoder<float>(encoder, derive_seed(seed, 2));
    }
    run.head = TaskHead<float>(encoder.embed_dim, config.head_hidden, run.task.output_size, derive_seed(seed, 1));
    run.optimizer = AdamW<float>(config.optimizer);
    run.schedule.patience = config.lr_patience;
    run.schedule.factor = config.lr_factor;

    const Index d = run.task.output_size;
    run.target_mean = Eigen::RowVectorXd::Zero(d);
    run.target_std = Eigen::RowVectorXd::Ones(d);
    if (kind == TaskKind::positioning) {
        const Eigen::MatrixXd p = positions_of(data, run.train, d);
        run.target_mean = p.colwise().mean();
        const Eigen::MatrixXd c = p.rowwise() - run.target_mean;
        run.target_std = (c.array().square().colwise().sum() / static_cast<double>(p.rows())).sqrt();
        for (Index j = 0; j < d; ++j) {
            if (!(run.target_std(j) > 0.0)) run.target_std(j) = 1.0;
        }
    }
    return run;
}

FinetuneMetrics finetune(FinetuneRun& run, const Dataset& data, Index epochs, const FinetuneConfig& config) {
    run.freeze_encoder = false;
    return train_run(run, data, epochs, config);
}

FinetuneMetrics linear_probe(FinetuneRun& run, const Dataset& data, Index epochs, const FinetuneConfig& config) {
    run.freeze_encoder = true;
    return train_run(run, data, epochs, config);
}

Eigen::MatrixXd predict(const FinetuneRun& run, const Dataset& data, std::span<const Index> indices) {
    constexpr std::size_t kChunk = 256;
    Eigen::MatrixXd out(static_cast<Index>(indices.size()), run.task.output_size);
    for (std::size_t start = 0; start < indices.size(); start += kChunk) {
        const std::size_t len = std::min(indices.size(), start + kChunk) - start;
        out.middleRows(static_cast<Index>(start), static_cast<Index>(len)) =
            head_output(run, data, indices.subspan(start, len)).cast<double>();
    }
    if (!run.task.is_classification()) {
        out = (out.array().rowwise() * run.target_std.array()).matrix().rowwise() + run.target_mean;
    }
    return out;
}

double mean_error_distance(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth) {
    if (pred.rows() != truth.rows() || pred.cols() != truth.cols() || pred.rows() == 0) {
        throw ContractError("mean_error_distance: shape mismatch or empty input");
    }
    return (pred - truth).rowwise().norm().mean();
}

double classification_accuracy(const Eigen::MatrixXd& logits, std::span<const Index> labels) {
    if (static_cast<std::size_t>(logits.rows()) != labels.size() || labels.empty()) {
        throw ContractError("classification_accuracy: row/label count mismatch or empty input");
    }
    const std::vector<Index> best = argmax_rows(logits);
    Index hits = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) hits += best[i] == labels[i] ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(labels.size());
}

double evaluate_positioning(const FinetuneRun& run, const Dataset& data, std::span<const Index> indices) {
    if (run.task.kind != TaskKind::positioning) throw ContractError("evaluate_positioning on a classification run");
    return mean_error_distance(predict(run, data, indices), positions_of(data, indices, run.task.output_size));
}

double evaluate_classification(const FinetuneRun& run, const Dataset& data, std::span<const Index> indices) {
    if (!run.task.is_classification()) throw ContractError("evaluate_classification on a positioning run");
    return classification_accuracy(predict(run, data, indices), class_labels(data, indices, run.task.kind));
}

double validation_loss(const FinetuneRun& run, const Dataset& data, std::span<const Index> indices) {
    constexpr std::size_t kChunk = 256;
    double total = 0.0;
    for (std::size_t start = 0; start < indices.size(); start += kChunk) {
        const std::size_t len = std::min(indices.size(), start + kChunk) - start;
        const auto idx = indices.subspan(start, len);
        total += task_loss(run, data, idx, head_output(run, data, idx).cast<double>()).loss * static_cast<double>(len);
    }
    return total / static_cast<double>(indices.size());
}

Improvement improvement_report(double pretrained_metric, double scratch_metric, TaskKind kind) {
    if (scratch_metric == 0.0) throw ContractError("improvement_report: scratch metric is zero");
    Improvement r;
    if (kind == TaskKind::positioning) {
        r.absolute = scratch_metric - pretrained_metric;
    } else {
        r.absolute = pretrained_metric - scratch_metric;
    }
    r.relative = r.absolute / scratch_metric;
    return r;
}

std::string RunRecord::metric_name() const {
    return task == TaskKind::positioning ? "mean_error_distance_m" : "top1_accuracy";
}

std::string RunRecord::to_json() const {
    nlohmann::json j;
    j["format"] = "csiclip-run";
    j["task"] = to_string(task);
    j["init"] = to_string(init);
    j["probe"] = probe;
    j["seed"] = seed;
    j["label_budget"] = label_budget;
    j["epochs"] = epochs;
    j["metric"] = metric_name();
    j["best_epoch"] = metrics.best_epoch;
    j["best_val_loss"] = metrics.best_val_loss;
    j["val_metric"] = metrics.val_metric;
    j["test_metric"] = metrics.test_metric;
    j["init_val_metric"] = metrics.init_val_metric;
    j["train_loss"] = metrics.train_loss;
    j["val_loss"] = metrics.val_loss;
    j["val_metric_history"] = metrics.val_metric_history;
    return j.dump(2);
}

RunRecord RunRecord::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("run record is not valid JSON: ") + e.what());
    }
    if (j.value("format", "") != "csiclip-run") throw DataError("not a run record");
    try {
        RunRecord r;
        r.task = task_from_string(j.at("task").get<std::string>());
        const std::string init = j.at("init").get<std::string>();
        if (init != "pretrained" && init != "scratch") throw DataError("run record has unknown init '" + init + "'");
        r.init = init == "pretrained" ? InitMode::pretrained : InitMode::scratch;
        r.probe = j.at("probe").get<bool>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.label_budget = j.at("label_budget").get<Index>();
        r.epochs = j.at("epochs").get<Index>();
        r.metrics.best_epoch = j.at("best_epoch").get<Index>();
        r.metrics.best_val_loss = j.at("best_val_loss").get<double>();
        // NaN metrics serialize as null.
        auto num = [&](const char* key) {
            return j.at(key).is_null() ? std::numeric_limits<double>::quiet_NaN() : j.at(key).get<double>();
        };
        r.metrics.val_metric = num("val_metric");
        r.metrics.test_metric = num("test_metric");
        r.metrics.init_val_metric = num("init_val_metric");
        r.metrics.train_loss = j.at("train_loss").get<std::vector<double>>();
        r.metrics.val_loss = j.at("val_loss").get<std::vector<double>>();
        for (const auto& v : j.at("val_metric_history")) {
            r.metrics.val_metric_history.push_back(v.is_null() ? std::numeric_limits<double>::quiet_NaN()
                                                                : v.get<double>());
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("run record is malformed: ") + e.what());
    }
}

void save_run(const std::filesystem::path& dir, const FinetuneRun& run, const RunRecord& record,
              const std::string& config_echo) {
    std::filesystem::create_directories(dir);
    Checkpoint ck;
    ck.kind = "finetune";
    ck.config_echo = config_echo;
    ck.epoch = static_cast<std::uint64_t>(record.metrics.best_epoch);
    ck.add_parameters(kEncoderPrefix, run.encoder.parameters());
    ck.add_parameters(kHeadPrefix, run.head.parameters());
    ck.add_tensor("target_mean", run.target_mean.cast<float>());
    ck.add_tensor("target_std", run.target_std.cast<float>());
    ck.save(dir / kRunCheckpointFile);
    binio::write_text_atomic(dir / kRunMetricsFile, record.to_json() + "\n");
}

RunRecord load_run_record(const std::filesystem::path& dir) {
    const std::vector<char> bytes = binio::read_file(dir / kRunMetricsFile);
    return RunRecord::from_json(std::string(bytes.begin(), bytes.end()));
}

}  // namespace csiclip
