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

#include "csiclip/pretrain.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "csiclip/losses.hpp"

namespace csiclip {

namespace {

constexpr char kCsiPrefix[] = "csi_encoder/";
constexpr char kCirPrefix[] = "cir_encoder/";
constexpr char kBestPrefix[] = "best/csi_encoder/";
constexpr char kBestCirPrefix[] = "best/cir_encoder/";
constexpr char kBestTemperature[] = "best/log_temperature";
constexpr char kOptPrefix[] = "opt/";

void clamp_temperature(PretrainState& state, const PretrainConfig& config) {
    const auto floor = static_cast<float>(std::log(config.min_temperature));
    float& lt = state.log_temperature.value(0, 0);
    if (lt < floor) lt = floor;
}

}  // namespace

EncoderConfig encoder_config(const LinkConfig& link, const std::vector<Index>& widths, Index embed_dim) {
    EncoderConfig c;
    c.in_channels = 2;
    c.height = link.bs.size() * link.ue.size();
    c.width = link.n_subcarriers;
    c.widths = widths;
    c.embed_dim = embed_dim;
    return c;
}

ParamRefs<float> PretrainState::trainable() {
    ParamRefs<float> refs = csi_encoder.refs();
    for (auto* p : cir_encoder.refs()) refs.push_back(p);
    refs.push_back(&log_temperature);
    return refs;
}

void PretrainState::restore_best() {
    if (best_csi_encoder.empty()) return;
    copy_values(csi_encoder.parameters(), best_csi_encoder);
    copy_values(cir_encoder.parameters(), best_cir_encoder);
    log_temperature.value = best_log_temperature;
}

PretrainState init_pretrain_state(const PretrainConfig& config, const EncoderConfig& encoder, std::uint64_t seed) {
    PretrainState s;
    s.csi_encoder = ConvEncoder<float>(encoder, derive_seed(seed, 11));
    s.cir_encoder = ConvEncoder<float>(encoder, derive_seed(seed, 12));
    Mat<float> lt(1, 1);
    lt(0, 0) = static_cast<float>(std::log(config.init_temperature));
    s.log_temperature = Parameter<float>("log_temperature", lt, false);
    s.optimizer = AdamW<float>(config.optimizer);
    s.schedule.patience = config.lr_patience;
    s.schedule.factor = config.lr_factor;
    s.rng.seed(derive_seed(seed, 13));
    return s;
}

RetrievalResult retrieval_accuracy(const Eigen::MatrixXd& similarity) {
    const Index n = similarity.rows();
    if (n < 2 || similarity.cols() != n) throw ContractError("retrieval_accuracy: need a square batch of size >= 2");
    const std::vector<Index> best = argmax_rows(similarity);
    Index hits = 0;
    for (Index i = 0; i < n; ++i) hits += best[static_cast<std::size_t>(i)] == i ? 1 : 0;
    RetrievalResult r;
    r.accuracy = static_cast<double>(hits) / static_cast<double>(n);
    r.degenerate = (similarity.maxCoeff() - similarity.minCoeff()) < 1e-12;
    return r;
}

namespace {

struct StepResult {
    double loss = 0.0;
    double retrieval = 0.0;
};

StepResult contrastive_step(PretrainState& state, const Dataset& data, std::span<const Index> idx,
                            const PretrainConfig& config, bool train, double temperature) {
    const Batch csi = data.load_batch(idx, Modality::csi);
    const Batch cir = data.load_batch(idx, Modality::cir);
    ConvEncoder<float>::Cache csi_cache, cir_cache;
    const Mat<float> z_csi = state.csi_encoder.forward(csi.input, train ? &csi_cache : nullptr);
    const Mat<float> z_cir = state.cir_encoder.forward(cir.input, train ? &cir_cache : nullptr);
    const ContrastiveResult r =
        contrastive_loss(z_csi.cast<double>(), z_cir.cast<double>(), temperature, config.symmetric);
    if (!std::isfinite(r.loss)) throw DivergenceError("contrastive loss became non-finite");
    if (train) {
        const ParamRefs<float> params = state.trainable();
        zero_grad(params);
        state.csi_encoder.backward(csi_cache, r.grad_csi.cast<float>());
        state.cir_encoder.backward(cir_cache, r.grad_cir.cast<float>());
        state.log_temperature.grad(0, 0) =
            config.learn_temperature ? static_cast<float>(r.grad_log_temperature) : 0.0f;
        state.optimizer.step(params);
        clamp_temperature(state, config);
    }
    return {r.loss, retrieval_accuracy(r.similarity).accuracy};
}

}  // namespace

PretrainMetrics pretrain_epoch(PretrainState& state, const Dataset& data, std::span<const Index> train,
                               Index batch_size, const PretrainConfig& config) {
    if (batch_size < 2) throw ContractError("pretrain_epoch: batch_size must be >= 2");
    std::vector<Index> order(train.begin(), train.end());
    std::shuffle(order.begin(), order.end(), state.rng);
    PretrainMetrics m;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
        const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
        if (end - start < 2) {
            m.dropped += static_cast<Index>(end - start);
            continue;
        }
        const std::span<const Index> idx(order.data() + start, end - start);
        const StepResult r = contrastive_step(state, data, idx, config, true, state.temperature());
        m.loss += r.loss;
        m.retrieval += r.retrieval;
        ++m.batches;
    }
    if (m.batches > 0) {
        m.loss /= static_cast<double>(m.batches);
        m.retrieval /= static_cast<double>(m.batches);
    }
    return m;
}

PretrainMetrics evaluate_pretrain(const PretrainState& state, const Dataset& data, std::span<const Index> indices,
                                  Index batch_size, const PretrainConfig& config, double temperature_override) {
    if (batch_size < 2) throw ContractError("evaluate_pretrain: batch_size must be >= 2");
    const double tau = temperature_override > 0.0 ? temperature_override : state.temperature();
    auto& mutable_state = const_cast<PretrainState&>(state);  // forward-only; no member is written
    PretrainMetrics m;
    for (std::size_t start = 0; start < indices.size(); start += static_cast<std::size_t>(batch_size)) {
        const std::size_t end = std::min(indices.size(), start + static_cast<std::size_t>(batch_size));
        if (end - start < 2) {
            m.dropped += static_cast<Index>(end - start);
            continue;
        }
        const StepResult r = contrastive_step(mutable_state, data, indices.subspan(start, end - start), config,
                                              false, tau);
        m.loss += r.loss;
        m.retrieval += r.retrieval;
        ++m.batches;
    }
    if (m.batches > 0) {
        m.loss /= static_cast<double>(m.batches);
        m.retrieval /= static_cast<double>(m.batches);
    }
    return m;
}

Eigen::MatrixXd embed(const ConvEncoder<float>& encoder, const Dataset& data, std::span<const Index> indices,
                      Modality m) {
    constexpr std::size_t kChunk = 256;
    Eigen::MatrixXd out(static_cast<Index>(indices.size()), encoder.config().embed_dim);
    for (std::size_t start = 0; start < indices.size(); start += kChunk) {
        const std::size_t end = std::min(indices.size(), start + kChunk);
        const Batch b = data.load_batch(indices.subspan(start, end - start), m);
        out.middleRows(static_cast<Index>(start), static_cast<Index>(end - start)) =
            encoder.forward(b.input).cast<double>();
    }
    return out;
}

double similarity_spread(const Eigen::MatrixXd& embeddings) {
    const Index n = embeddings.rows();
    if (n < 2) throw ContractError("similarity_spread: need at least two embeddings");
    const Eigen::MatrixXd s = cosine_matrix(embeddings, embeddings);
    double sum = 0.0, sq = 0.0;
    const double count = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
    for (Index i = 0; i < n; ++i) {
        for (Index j = i + 1; j < n; ++j) sum += s(i, j);
    }
    const double mean = sum / count;
    for (Index i = 0; i < n; ++i) {
        for (Index j = i + 1; j < n; ++j) sq += (s(i, j) - mean) * (s(i, j) - mean);
    }
    return std::sqrt(sq / count);
}

std::string EpochRecord::to_json() const {
    const nlohmann::json j = {{"epoch", epoch},       {"train_loss", train_loss}, {"val_loss", val_loss},
                              {"retrieval", retrieval}, {"lr", lr},             {"temperature", temperature}};
    return j.dump();
}

void run_pretraining(PretrainState& state, const Dataset& data, const PretrainConfig& config,
                     const std::function<void(const EpochRecord&)>& on_epoch) {
    const std::vector<Index> train = data.manifest().train_indices();
    const std::vector<Index> val = data.manifest().val_indices();
    if (val.size() < 2) throw DataError("pretraining needs at least two validation records");
    while (state.epoch < config.epochs) {
        if (!state.val_history.empty() && early_stop_check(state.val_history, config.early_stop_patience)) break;
        EpochRecord rec;
        rec.lr = state.optimizer.learning_rate();
        const PretrainMetrics tm = pretrain_epoch(state, data, train, config.batch_size, config);
        const PretrainMetrics vm = evaluate_pretrain(state, data, val, config.batch_size, config);
        ++state.epoch;
        state.val_history.push_back(vm.loss);
        if (vm.loss < state.best_val_loss) {
            state.best_val_loss = vm.loss;
            state.best_epoch = state.epoch;
            state.best_csi_encoder = state.csi_encoder.parameters();
            state.best_cir_encoder = state.cir_encoder.parameters();
            state.best_log_temperature = state.log_temperature.value;
        }
        state.optimizer.set_learning_rate(state.schedule.step(vm.loss, state.optimizer.learning_rate()));
        rec.epoch = state.epoch;
        rec.train_loss = tm.loss;
        rec.val_loss = vm.loss;
        rec.retrieval = vm.retrieval;
        rec.temperature = state.temperature();
        if (on_epoch) on_epoch(rec);
    }
}

Checkpoint to_checkpoint(const PretrainState& state, const std::string& config_echo) {
    Checkpoint ck;
    ck.kind = "pretrain";
    ck.config_echo = config_echo;
    ck.epoch = static_cast<std::uint64_t>(state.epoch);
    std::ostringstream rng;
    rng << state.rng;
    ck.rng_state = rng.str();
    ck.add_parameters(kCsiPrefix, state.csi_encoder.parameters());
    ck.add_parameters(kCirPrefix, state.cir_encoder.parameters());
    ck.add_tensor("log_temperature", state.log_temperature.value);
    if (!state.best_csi_encoder.empty()) {
        ck.add_parameters(kBestPrefix, state.best_csi_encoder);
        ck.add_parameters(kBestCirPrefix, state.best_cir_encoder);
        ck.add_tensor(kBestTemperature, state.best_log_temperature);
    }
    ck.add_optimizer(kOptPrefix, state.optimizer);
    ck.scalars["best_val_loss"] = state.best_val_loss;
    ck.scalars["best_epoch"] = static_cast<double>(state.best_epoch);
    ck.scalars["schedule.best"] = state.schedule.best;
    ck.scalars["schedule.bad_epochs"] = static_cast<double>(state.schedule.bad_epochs);
    ck.scalars["val_history.size"] = static_cast<double>(state.val_history.size());
    for (std::size_t i = 0; i < state.val_history.size(); ++i) {
        ck.scalars["val_history/" + std::to_string(i)] = state.val_history[i];
    }
    return ck;
}

PretrainState from_checkpoint(const Checkpoint& ck, const PretrainConfig& config, const EncoderConfig& encoder) {
    if (ck.kind != "pretrain") throw DataError("checkpoint kind '" + ck.kind + "' is not a pretraining checkpoint");
    PretrainState s = init_pretrain_state(config, encoder, 0);
    ck.load_parameters(kCsiPrefix, s.csi_encoder.parameters());
    ck.load_parameters(kCirPrefix, s.cir_encoder.parameters());
    s.log_temperature.value = ck.tensor("log_temperature");
    if (ck.has_tensor(std::string(kBestPrefix) + s.csi_encoder.parameters().front().name)) {
        s.best_csi_encoder = s.csi_encoder.parameters();
        ck.load_parameters(kBestPrefix, s.best_csi_encoder);
        s.best_cir_encoder = s.cir_encoder.parameters();
        ck.load_parameters(kBestCirPrefix, s.best_cir_encoder);
        s.best_log_temperature = ck.tensor(kBestTemperature);
    }
    ck.load_optimizer(kOptPrefix, s.optimizer);
    s.epoch = static_cast<Index>(ck.epoch);
    std::istringstream rng(ck.rng_state);
    rng >> s.rng;
    if (!rng) throw DataError("checkpoint RNG state is malformed");
    s.best_val_loss = ck.scalar("best_val_loss");
    s.best_epoch = static_cast<Index>(ck.scalar("best_epoch"));
    s.schedule.best = ck.scalar("schedule.best");
    s.schedule.bad_epochs = static_cast<Index>(ck.scalar("schedule.bad_epochs"));
    const auto n = static_cast<std::size_t>(ck.scalar("val_history.size"));
    for (std::size_t i = 0; i < n; ++i) s.val_history.push_back(ck.scalar("val_history/" + std::to_string(i)));
    return s;
}

}  // namespace csiclip
