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

// csiclip generate | pretrain | finetune | report

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "csiclip/config.hpp"
#include "csiclip/report.hpp"

namespace fs = std::filesystem;
using namespace csiclip;

namespace {

constexpr char kPretrainCheckpoint[] = "pretrain.ckpt";
constexpr char kPretrainLog[] = "metrics.jsonl";
constexpr char kConfigEcho[] = "config.json";

void write_text(const fs::path& path, const std::string& text) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write " + path.string());
        out << text;
        if (!out) throw DataError("cannot write " + path.string());
    }
    fs::rename(tmp, path);
}

std::vector<std::string> read_lines(const fs::path& path) {
    std::vector<std::string> lines;
    std::ifstream in(path);
    for (std::string line; std::getline(in, line);) {
        if (!line.empty()) lines.push_back(line);
    }
    return lines;
}

WorkbenchConfig load_with_seed(const std::string& path, const std::optional<std::uint64_t>& seed) {
    WorkbenchConfig c = load_config(path);
    if (seed) c.seed = *seed;
    c.validate();
    return c;
}

void print_echo(const WorkbenchConfig& c) { std::cout << "config echo:\n" << c.echo() << "\n"; }

// ---------------------------------------------------------------- generate

struct GenerateArgs {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
};

int cmd_generate(const GenerateArgs& a) {
    const WorkbenchConfig c = load_with_seed(a.config, a.seed);
    print_echo(c);
    const Dataset d = generate_dataset(c);
    fs::create_directories(a.out);
    d.write(a.out);
    write_text(fs::path(a.out) / kConfigEcho, c.echo() + "\n");

    const DatasetManifest& m = d.manifest();
    std::printf("dataset '%s': %lld records, %zu train / %zu validation, crc32 %08x (%llu bytes)\n",
                m.name.c_str(), static_cast<long long>(m.record_count), m.train_indices().size(),
                m.val_indices().size(), m.records_crc32, static_cast<unsigned long long>(m.records_bytes));
    for (const ScenarioEntry& s : m.scenarios) {
        std::printf("  scenario %-16s id %u: generated %lld, kept %lld\n", s.config.name.c_str(), s.config.id,
                    static_cast<long long>(s.generated), static_cast<long long>(s.selected));
    }
    return 0;
}

// ---------------------------------------------------------------- pretrain

struct PretrainArgs {
    std::string data;
    std::string config;
    std::string out;
    std::optional<Index> epochs;
    std::optional<std::uint64_t> seed;
    std::string resume;
};

int cmd_pretrain(const PretrainArgs& a) {
    WorkbenchConfig c = load_with_seed(a.config, a.seed);
    if (a.epochs) c.pretrain.epochs = *a.epochs;
    c.validate();
    print_echo(c);

    Dataset data = Dataset::load(a.data);
    data.precompute(Modality::csi);
    data.precompute(Modality::cir);
    const EncoderConfig enc = encoder_config(data.manifest().link, c.pretrain.widths, c.pretrain.embed_dim);
    const std::string echo = c.echo();

    fs::create_directories(a.out);
    const fs::path log_path = fs::path(a.out) / kPretrainLog;
    const fs::path ckpt_path = fs::path(a.out) / kPretrainCheckpoint;
    std::vector<std::string> log;
    PretrainState state;
    if (!a.resume.empty()) {
        state = from_checkpoint(Checkpoint::load(a.resume), c.pretrain, enc);
        log = read_lines(log_path);
        if (log.size() < static_cast<std::size_t>(state.epoch)) {
            throw DataError("metrics log " + log_path.string() + " is shorter than the resumed checkpoint");
        }
        log.resize(static_cast<std::size_t>(state.epoch));
        std::printf("resuming at epoch %lld\n", static_cast<long long>(state.epoch));
    } else {
        state = init_pretrain_state(c.pretrain, enc, c.seed);
    }
    write_text(fs::path(a.out) / kConfigEcho, echo + "\n");

    run_pretraining(state, data, c.pretrain, [&](const EpochRecord& r) {
        log.push_back(r.to_json());
        std::string text;
        for (const std::string& line : log) text += line + "\n";
        write_text(log_path, text);
        to_checkpoint(state, echo).save(ckpt_path);
        std::printf("epoch %3lld  train %.5f  val %.5f  retrieval %.4f  lr %.3g  tau %.4f\n",
                    static_cast<long long>(r.epoch), r.train_loss, r.val_loss, r.retrieval, r.lr, r.temperature);
        std::fflush(stdout);
    });
    to_checkpoint(state, echo).save(ckpt_path);

    const std::vector<Index> val = data.manifest().val_indices();
    PretrainState best = from_checkpoint(Checkpoint::load(ckpt_path), c.pretrain, enc);
    best.restore_best();
    const double retrieval = evaluate_pretrain(best, data, val, c.pretrain.batch_size, c.pretrain).retrieval;
    const double spread = similarity_spread(embed(best.csi_encoder, data, val, Modality::csi));
    std::printf("finished at epoch %lld; best validation loss %.5f at epoch %lld; "
                "retrieval %.4f; CSI similarity spread %.4f\n",
                static_cast<long long>(state.epoch), state.best_val_loss, static_cast<long long>(state.best_epoch),
                retrieval, spread);
    return 0;
}

// ---------------------------------------------------------------- finetune

struct FinetuneArgs {
    std::string data;
    std::string config;
    std::string task;
    std::string init = "scratch";
    std::optional<Index> labels;
    std::optional<std::uint64_t> seed;
    std::vector<std::uint64_t> seeds;
    std::optional<Index> epochs;
    int jobs = 1;
    bool probe = false;
    std::string out;
};

std::string run_name(TaskKind task, InitMode init, std::uint64_t seed, Index labels, bool probe) {
    std::ostringstream s;
    s << to_string(task) << "-" << to_string(init) << "-labels" << labels << "-seed" << seed;
    if (probe) s << "-probe";
    return s.str();
}

int cmd_finetune(const FinetuneArgs& a) {
    WorkbenchConfig c = load_with_seed(a.config, a.seed);
    if (a.labels) c.finetune.label_budget = *a.labels;
    if (a.epochs) c.finetune.epochs = *a.epochs;
    c.validate();
    const TaskKind task = task_from_string(a.task);
    std::vector<std::uint64_t> seeds = a.seeds;
    if (seeds.empty()) seeds.push_back(c.seed);
    print_echo(c);

    Dataset data = Dataset::load(a.data);
    data.precompute(Modality::csi);
    const EncoderConfig enc = encoder_config(data.manifest().link, c.pretrain.widths, c.pretrain.embed_dim);

    const InitMode init = a.init == "scratch" ? InitMode::scratch : InitMode::pretrained;
    std::optional<Checkpoint> ckpt;
    if (init == InitMode::pretrained) {
        fs::path p = a.init;
        if (fs::is_directory(p)) p /= kPretrainCheckpoint;
        ckpt = Checkpoint::load(p);
    }
    if (a.probe && init == InitMode::scratch) std::printf("note: probing a scratch encoder\n");

    const std::string echo = c.echo();
    std::vector<std::string> lines(seeds.size());
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (std::size_t i = next++; i < seeds.size(); i = next++) {
            try {
                const std::uint64_t seed = seeds[i];
                FinetuneRun run = make_run(data, task, init, ckpt ? &*ckpt : nullptr, seed, c.finetune, enc);
                RunRecord rec;
                rec.task = task;
                rec.init = init;
                rec.probe = a.probe;
                rec.seed = seed;
                rec.label_budget = c.finetune.label_budget;
                rec.epochs = c.finetune.epochs;
                rec.metrics = a.probe ? linear_probe(run, data, c.finetune.epochs, c.finetune)
                                      : finetune(run, data, c.finetune.epochs, c.finetune);
                save_run(fs::path(a.out) / run_name(task, init, seed, rec.label_budget, a.probe), run, rec, echo);
                char buf[256];
                std::snprintf(buf, sizeof buf, "%s seed %llu: best epoch %lld, val %s %.4f, test %.4f",
                              run_name(task, init, seed, rec.label_budget, a.probe).c_str(),
                              static_cast<unsigned long long>(seed), static_cast<long long>(rec.metrics.best_epoch),
                              rec.metric_name().c_str(), rec.metrics.val_metric, rec.metrics.test_metric);
                lines[i] = buf;
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    const int jobs = std::max(1, std::min<int>(a.jobs, static_cast<int>(seeds.size())));
    std::vector<std::thread> pool;
    for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
    for (const std::string& l : lines) std::printf("%s\n", l.c_str());
    return 0;
}

// ---------------------------------------------------------------- report

struct ReportArgs {
    std::vector<std::string> runs;
    std::string out;
};

int cmd_report(const ReportArgs& a) {
    std::vector<fs::path> dirs;
    for (const std::string& r : a.runs) {
        const fs::path p = r;
        if (fs::exists(p / kRunMetricsFile)) {
            dirs.push_back(p);
        } else if (fs::is_directory(p)) {
            for (const auto& e : fs::recursive_directory_iterator(p)) {
                if (e.is_regular_file() && e.path().filename() == kRunMetricsFile) dirs.push_back(e.path().parent_path());
            }
        } else {
            throw DataError("no run artifact at " + r);
        }
    }
    std::sort(dirs.begin(), dirs.end());
    dirs.erase(std::unique(dirs.begin(), dirs.end()), dirs.end());
    std::vector<RunRecord> records;
    for (const fs::path& d : dirs) records.push_back(load_run_record(d));
    const Report report = build_report(records);
    const std::string text = report.to_text();
    if (!a.out.empty()) {
        fs::create_directories(a.out);
        write_text(fs::path(a.out) / "report.json", report.to_json() + "\n");
        write_text(fs::path(a.out) / "report.txt", text);
    }
    std::cout << text;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CSI/CIR contrastive pretraining workbench"};
    app.require_subcommand(1);

    GenerateArgs g;
    auto* gen = app.add_subcommand("generate", "generate a channel dataset");
    gen->add_option("--config", g.config, "config file")->required()->check(CLI::ExistingFile);
    gen->add_option("--out", g.out, "output dataset directory")->required();
    gen->add_option("--seed", g.seed, "override config seed");

    PretrainArgs p;
    auto* pre = app.add_subcommand("pretrain", "contrastive pretraining of the CSI and CIR encoders");
    pre->add_option("--data", p.data, "dataset directory")->required()->check(CLI::ExistingDirectory);
    pre->add_option("--config", p.config, "config file")->required()->check(CLI::ExistingFile);
    pre->add_option("--out", p.out, "output directory")->required();
    pre->add_option("--epochs", p.epochs, "override pretrain.epochs");
    pre->add_option("--seed", p.seed, "override config seed");
    pre->add_option("--resume", p.resume, "checkpoint to resume from")->check(CLI::ExistingFile);

    FinetuneArgs f;
    auto* fin = app.add_subcommand("finetune", "fine-tune a task head (and encoder) on labeled data");
    fin->add_option("--data", f.data, "dataset directory")->required()->check(CLI::ExistingDirectory);
    fin->add_option("--config", f.config, "config file")->required()->check(CLI::ExistingFile);
    fin->add_option("--task", f.task, "positioning | beam_management | channel_identification")->required();
    fin->add_option("--init", f.init, "'scratch' or a pretraining checkpoint (file or directory)");
    fin->add_option("--labels", f.labels, "label budget (0 = all records)");
    auto* seed_opt = fin->add_option("--seed", f.seed, "override config seed");
    fin->add_option("--seeds", f.seeds, "run several seeds")->delimiter(',')->excludes(seed_opt);
    fin->add_option("--epochs", f.epochs, "override finetune.epochs");
    fin->add_option("--jobs", f.jobs, "seeds trained in parallel")->check(CLI::PositiveNumber);
    fin->add_flag("--probe", f.probe, "freeze the encoder and train the head only");
    fin->add_option("--out", f.out, "parent directory for run artifacts")->required();

    ReportArgs r;
    auto* rep = app.add_subcommand("report", "pretrained vs scratch comparison tables");
    rep->add_option("runs", r.runs, "run directories or parents of run directories")->required();
    rep->add_option("--out", r.out, "directory for report.json and report.txt");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : static_cast<int>(ErrorKind::config);
    }

    try {
        if (*gen) return cmd_generate(g);
        if (*pre) return cmd_pretrain(p);
        if (*fin) return cmd_finetune(f);
        if (*rep) return cmd_report(r);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
