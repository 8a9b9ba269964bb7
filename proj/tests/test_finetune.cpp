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


#include <doctest.h>

#include <cmath>
#include <numeric>

#include "csiclip/finetune.hpp"
#include "csiclip/pretrain.hpp"
#include "fixtures.hpp"

using namespace csiclip;

namespace {

const WorkbenchConfig& config() {
    static const WorkbenchConfig c = fixtures::tiny_config(240);
    return c;
}

const Dataset& dataset() {
    static const Dataset d = generate_dataset(config());
    return d;
}

// A short pretraining run so pretrained mode has something to load.
const Checkpoint& pretrained() {
    static const Checkpoint ck = [] {
        auto c = config();
        c.pretrain.epochs = 3;
        auto s = init_pretrain_state(c.pretrain, c.encoder(), 11);
        run_pretraining(s, dataset(), c.pretrain);
        return to_checkpoint(s, c.echo());
    }();
    return ck;
}

FinetuneRun run_for(TaskKind k, InitMode m, std::uint64_t seed, const FinetuneConfig& fc) {
    return make_run(dataset(), k, m, m == InitMode::pretrained ? &pretrained() : nullptr, seed, fc,
                    config().encoder());
}

std::vector<Mat<float>> values(const ParamRefs<float>& refs) {
    std::vector<Mat<float>> out;
    for (auto* p : refs) out.push_back(p->value);
    return out;
}

}  // namespace

TEST_CASE("mean error distance: hand cases and loop oracle") {
    Eigen::MatrixXd a(2, 2);
    a << 0, 0, 2, 0;
    CHECK(mean_error_distance(a, a) == 0.0);
    const Eigen::MatrixXd centroid = Eigen::MatrixXd::Constant(2, 2, 0.0).rowwise() + Eigen::RowVector2d(1, 0);
    CHECK(mean_error_distance(centroid, a) == doctest::Approx(1.0));

    std::mt19937_64 rng(5);
    std::normal_distribution<double> g;
    Eigen::MatrixXd p(50, 3), t(50, 3);
    for (Index i = 0; i < 50; ++i) {
        for (Index j = 0; j < 3; ++j) {
            p(i, j) = g(rng);
            t(i, j) = g(rng);
        }
    }
    double sum = 0.0;
    for (Index i = 0; i < 50; ++i) {
        double sq = 0.0;
        for (Index j = 0; j < 3; ++j) sq += (p(i, j) - t(i, j)) * (p(i, j) - t(i, j));
        sum += std::sqrt(sq);
    }
    CHECK(mean_error_distance(p, t) == doctest::Approx(sum / 50.0).epsilon(1e-12));
}

TEST_CASE("classification accuracy: hand cases") {
    const std::vector<Index> labels{0, 1, 2};
    CHECK(classification_accuracy(Eigen::MatrixXd::Identity(3, 3), labels) == 1.0);

    // Constant predictor on a balanced two-class split.
    Eigen::MatrixXd constant(4, 2);
    constant << 1, 0, 1, 0, 1, 0, 1, 0;
    const std::vector<Index> balanced{0, 1, 0, 1};
    CHECK(classification_accuracy(constant, balanced) == 0.5);

    // Ten rows counted by hand: rows 0, 2, 3, 6, 8, 9 are right, row 5 ties and resolves to column 0.
    Eigen::MatrixXd l(10, 3);
    l << 3, 1, 0,
         0, 0, 1,
         0, 2, 1,
         0, 0, 5,
         1, 0, 0,
         2, 2, 0,
         0, 4, 1,
         1, 0, 0,
         9, 0, 0,
         0, 0, 1;
    const std::vector<Index> y{0, 0, 1, 2, 2, 1, 1, 2, 0, 2};
    CHECK(classification_accuracy(l, y) == doctest::Approx(0.6));
}

TEST_CASE("improvement report") {
    const auto pos = improvement_report(34.18, 49.03, TaskKind::positioning);
    CHECK(std::abs(pos.relative * 100.0 - 30.29) < 0.01);
    CHECK(pos.absolute == doctest::Approx(14.85));

    CHECK(improvement_report(0.7, 0.7, TaskKind::beam_management).relative == 0.0);

    const auto ci = improvement_report(78.38, 75.68, TaskKind::channel_identification);
    CHECK(std::abs(ci.relative * 100.0 - 3.57) < 0.01);
    CHECK(ci.absolute == doctest::Approx(2.70));

    CHECK_THROWS_AS(improvement_report(1.0, 0.0, TaskKind::positioning), ContractError);
}

TEST_CASE("task names and output sizes") {
    CHECK(task_from_string("positioning") == TaskKind::positioning);
    CHECK(task_from_string("bm") == TaskKind::beam_management);
    CHECK(task_from_string("ci") == TaskKind::channel_identification);
    CHECK_THROWS_AS(task_from_string("segmentation"), ConfigError);
    CHECK(TaskSpec::make(TaskKind::beam_management, config().link, 2).output_size == 4);
    CHECK(TaskSpec::make(TaskKind::channel_identification, config().link, 2).output_size == 2);
    CHECK(TaskSpec::make(TaskKind::positioning, config().link, 3).output_size == 3);
}

TEST_CASE("pretrained and scratch runs share head init, subset and splits") {
    auto fc = config().finetune;
    fc.label_budget = 100;
    auto s = run_for(TaskKind::positioning, InitMode::scratch, 4, fc);
    auto p = run_for(TaskKind::positioning, InitMode::pretrained, 4, fc);
    CHECK(values(s.head.refs()) == values(p.head.refs()));
    CHECK(s.train == p.train);
    CHECK(s.val == p.val);
    CHECK(s.train.size() + s.val.size() == 100);
    CHECK(values(s.encoder.refs()) != values(p.encoder.refs()));

    // The pretrained encoder is the best pretraining snapshot.
    auto enc = p.encoder.refs();
    const auto& ck = pretrained();
    const std::string prefix = ck.has_tensor("best/csi_encoder/" + enc[0]->name) ? "best/csi_encoder/" : "csi_encoder/";
    for (auto* r : enc) CHECK(ck.tensor(prefix + r->name) == r->value);
}

TEST_CASE("zero learning rate leaves parameters and metric unchanged") {
    auto fc = config().finetune;
    fc.label_budget = 80;
    fc.optimizer.learning_rate = 0.0;
    auto run = run_for(TaskKind::beam_management, InitMode::pretrained, 2, fc);
    const auto before = values(run.trainable());
    const auto m = finetune(run, dataset(), 3, fc);
    CHECK(values(run.trainable()) == before);
    CHECK(m.val_metric == m.init_val_metric);
}

TEST_CASE("linear probe freezes the encoder") {
    auto fc = config().finetune;
    fc.label_budget = 80;
    auto run = run_for(TaskKind::channel_identification, InitMode::pretrained, 2, fc);
    const auto enc = values(run.encoder.refs());
    const auto head = values(run.head.refs());
    linear_probe(run, dataset(), 3, fc);
    CHECK(values(run.encoder.refs()) == enc);
    CHECK(values(run.head.refs()) != head);

    fc.optimizer.learning_rate = 0.0;
    auto still = run_for(TaskKind::channel_identification, InitMode::pretrained, 2, fc);
    linear_probe(still, dataset(), 2, fc);
    CHECK(values(still.head.refs()) == head);
}

TEST_CASE("label budget above the labeled pool is an error") {
    auto fc = config().finetune;
    fc.label_budget = dataset().size() + 1;
    CHECK_THROWS_AS(run_for(TaskKind::positioning, InitMode::scratch, 1, fc), DataError);
}

TEST_CASE("held-out pool is disjoint from the labeled subset") {
    auto fc = config().finetune;
    fc.label_budget = 60;
    fc.eval_pool = 100;
    auto run = run_for(TaskKind::positioning, InitMode::scratch, 8, fc);
    CHECK(run.test.size() == 100);
    std::vector<Index> labeled = run.train;
    labeled.insert(labeled.end(), run.val.begin(), run.val.end());
    for (Index i : run.test) CHECK(std::find(labeled.begin(), labeled.end(), i) == labeled.end());
}

TEST_CASE("the reported parameters are those of the lowest validation loss") {
    auto fc = config().finetune;
    fc.label_budget = 120;
    auto run = run_for(TaskKind::positioning, InitMode::scratch, 6, fc);
    const auto m = finetune(run, dataset(), 12, fc);
    const auto best = std::min_element(m.val_loss.begin(), m.val_loss.end());
    CHECK(m.best_epoch == 1 + (best - m.val_loss.begin()));
    CHECK(m.best_val_loss == *best);
    CHECK(validation_loss(run, dataset(), run.val) == doctest::Approx(*best).epsilon(1e-9));
    CHECK(evaluate_positioning(run, dataset(), run.val) == m.val_metric);
}

TEST_CASE("beam classifier beats chance with every label") {
    auto fc = config().finetune;
    fc.optimizer.learning_rate = 3e-3;
    auto run = run_for(TaskKind::beam_management, InitMode::scratch, 1, fc);
    const auto m = finetune(run, dataset(), 40, fc);
    CHECK(m.val_metric > 1.0 / 4.0 + 0.15);
}

TEST_CASE("run records survive a save/load round trip") {
    auto fc = config().finetune;
    fc.label_budget = 60;
    auto run = run_for(TaskKind::positioning, InitMode::scratch, 3, fc);
    RunRecord r;
    r.task = TaskKind::positioning;
    r.seed = 3;
    r.label_budget = 60;
    r.epochs = 2;
    r.metrics = finetune(run, dataset(), 2, fc);
    const auto dir = fixtures::scratch_dir("run_record");
    save_run(dir, run, r, config().echo());
    const RunRecord back = load_run_record(dir);
    CHECK(back.to_json() == r.to_json());
    CHECK(std::isnan(back.metrics.test_metric));
    CHECK(Checkpoint::load(dir / kRunCheckpointFile).kind == "finetune");
}
