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

#include "csiclip/datapipe.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "binio.hpp"
#include "csiclip/config.hpp"

namespace csiclip {

using nlohmann::json;

namespace {

json stats_json(const NormStats& s) {
    return {{"min", s.min}, {"max", s.max}, {"mean", s.mean}, {"std", s.std}};
}

NormStats stats_from_json(const json& j) {
    NormStats s;
    s.min = j.at("min").get<double>();
    s.max = j.at("max").get<double>();
    s.mean = j.at("mean").get<double>();
    s.std = j.at("std").get<double>();
    return s;
}

std::vector<Index> shuffled_iota(Index n, std::uint64_t seed) {
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index(0));
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    return order;
}

}  // namespace

std::vector<Index> DatasetManifest::train_indices() const {
    std::vector<Index> out;
    for (std::size_t i = 0; i < is_train.size(); ++i) {
        if (is_train[i]) out.push_back(static_cast<Index>(i));
    }
    return out;
}

std::vector<Index> DatasetManifest::val_indices() const {
    std::vector<Index> out;
    for (std::size_t i = 0; i < is_train.size(); ++i) {
        if (!is_train[i]) out.push_back(static_cast<Index>(i));
    }
    return out;
}

std::string DatasetManifest::to_json() const {
    json scen = json::array();
    for (const auto& s : scenarios) {
        json e = csiclip::to_json(s.config);
        e["generated"] = s.generated;
        e["selected"] = s.selected;
        scen.push_back(e);
    }
    std::string split(is_train.size(), 'v');
    for (std::size_t i = 0; i < is_train.size(); ++i) {
        if (is_train[i]) split[i] = 't';
    }
    char crc[11];
    std::snprintf(crc, sizeof crc, "0x%08x", records_crc32);
    json j = {{"format", "csiclip-dataset"},
              {"version", kFormatVersion},
              {"name", name},
              {"generation_seed", generation_seed},
              {"link", csiclip::to_json(link)},
              {"codebook", {{"kind", "kronecker-dft"},
                            {"rows", link.bs.rows},
                            {"cols", link.bs.cols},
                            {"size", link.n_beams}}},
              {"scenarios", scen},
              {"scenario_cap", scenario_cap},
              {"record_count", record_count},
              {"records", {{"file", kRecordsFile}, {"bytes", records_bytes}, {"crc32", crc}}},
              {"split", {{"fraction", split_fraction}, {"seed", split_seed}, {"assignment", split}}},
              {"norm_stats", {{"csi", stats_json(csi_stats)}, {"cir", stats_json(cir_stats)}}}};
    return j.dump(2) + "\n";
}

DatasetManifest DatasetManifest::from_json(const std::string& text) {
    DatasetManifest m;
    try {
        const json j = json::parse(text);
        if (j.at("format") != "csiclip-dataset") throw DataError("manifest: unknown format");
        if (j.at("version").get<int>() != kFormatVersion) {
            throw DataError("manifest: unsupported version " + j.at("version").dump());
        }
        m.name = j.at("name").get<std::string>();
        m.generation_seed = j.at("generation_seed").get<std::uint64_t>();
        m.link = link_from_json(j.at("link"));
        for (const auto& e : j.at("scenarios")) {
            json cfg = e;
            cfg.erase("generated");
            cfg.erase("selected");
            m.scenarios.push_back({scenario_from_json(cfg, m.link), e.at("generated").get<Index>(),
                                   e.at("selected").get<Index>()});
        }
        m.scenario_cap = j.at("scenario_cap").get<Index>();
        m.record_count = j.at("record_count").get<Index>();
        const json& rec = j.at("records");
        m.records_bytes = rec.at("bytes").get<std::uint64_t>();
        m.records_crc32 = static_cast<std::uint32_t>(std::stoul(rec.at("crc32").get<std::string>(), nullptr, 16));
        const json& split = j.at("split");
        m.split_fraction = split.at("fraction").get<double>();
        m.split_seed = split.at("seed").get<std::uint64_t>();
        for (char c : split.at("assignment").get<std::string>()) {
            if (c != 't' && c != 'v') throw DataError("manifest: bad split assignment character");
            m.is_train.push_back(c == 't' ? 1 : 0);
        }
        m.csi_stats = stats_from_json(j.at("norm_stats").at("csi"));
        m.cir_stats = stats_from_json(j.at("norm_stats").at("cir"));
    } catch (const json::exception& e) {
        throw DataError(std::string("manifest: ") + e.what());
    } catch (const ConfigError& e) {
        throw DataError(std::string("manifest: ") + e.what());
    }
    if (static_cast<Index>(m.is_train.size()) != m.record_count) {
        throw DataError("manifest: split assignment length differs from record count");
    }
    Index selected = 0;
    for (const auto& s : m.scenarios) selected += s.selected;
    if (selected != m.record_count) throw DataError("manifest: scenario counts do not sum to record count");
    return m;
}

std::size_t record_size(Index n_paths, Index n_pairs, Index n_taps) {
    return kRecordHeaderBytes + kPathBytes * static_cast<std::size_t>(n_paths) +
           8 * static_cast<std::size_t>(n_pairs * n_taps);
}

std::vector<std::uint8_t> split_dataset(Index n, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw ContractError("split_dataset: fraction must lie in (0, 1)");
    const auto n_train = static_cast<Index>(std::floor(static_cast<double>(n) * fraction));
    const std::vector<Index> order = shuffled_iota(n, seed);
    std::vector<std::uint8_t> is_train(static_cast<std::size_t>(n), 0);
    for (Index k = 0; k < n_train; ++k) is_train[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = 1;
    return is_train;
}

std::vector<Index> stratified_counts(std::span<const Index> sizes, Index cap) {
    if (cap < 1) throw ContractError("stratified_cap: cap must be > 0");
    std::vector<Index> out;
    for (Index s : sizes) out.push_back(std::min(s, cap));
    return out;
}

std::vector<std::vector<Index>> stratified_cap(std::span<const Index> sizes, Index cap, std::uint64_t seed) {
    const std::vector<Index> counts = stratified_counts(sizes, cap);
    std::vector<std::vector<Index>> out;
    for (std::size_t s = 0; s < sizes.size(); ++s) {
        std::vector<Index> idx;
        if (counts[s] == sizes[s]) {
            idx.resize(static_cast<std::size_t>(sizes[s]));
            std::iota(idx.begin(), idx.end(), Index(0));
        } else {
            std::vector<Index> order = shuffled_iota(sizes[s], derive_seed(seed, s));
            idx.assign(order.begin(), order.begin() + counts[s]);
            std::sort(idx.begin(), idx.end());
        }
        out.push_back(std::move(idx));
    }
    return out;
}

Dataset Dataset::create(std::vector<ChannelSample> samples, DatasetManifest manifest) {
    manifest.link.validate();
    if (samples.empty()) throw DataError("dataset: no samples");
    const LinkConfig& link = manifest.link;
    Dataset d;
    d.cirs_.reserve(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const ChannelSample& s = samples[i];
        if (s.paths.empty() || static_cast<Index>(s.paths.size()) > kMaxPaths) {
            throw DataError("dataset: sample " + std::to_string(i) + " has an invalid path count");
        }
        if (s.beam_label < 0 || s.beam_label >= link.n_beams) {
            throw DataError("dataset: sample " + std::to_string(i) + " has beam label outside the codebook");
        }
        CIRTensor cir = synthesize_cir(s, link.bs, link.ue, link.n_taps);
        cir.data = cir.data.cast<std::complex<float>>().cast<cd>();
        d.cirs_.push_back(std::move(cir));
    }
    d.samples_ = std::move(samples);
    d.manifest_ = std::move(manifest);
    d.manifest_.record_count = d.size();
    const std::vector<char> bytes = d.serialize_records();
    d.manifest_.records_bytes = bytes.size();
    d.manifest_.records_crc32 = binio::crc32_of(bytes.data(), bytes.size());
    d.resplit(d.manifest_.split_fraction, d.manifest_.split_seed);
    return d;
}

void Dataset::resplit(double fraction, std::uint64_t seed) {
    manifest_.split_fraction = fraction;
    manifest_.split_seed = seed;
    manifest_.is_train = split_dataset(size(), fraction, seed);
    const std::vector<Index> train = manifest_.train_indices();
    if (train.empty()) throw DataError("dataset: training split is empty");
    manifest_.csi_stats = fit_stats(train, Modality::csi);
    manifest_.cir_stats = fit_stats(train, Modality::cir);
    cache_[0].clear();
    cache_[1].clear();
}

std::vector<char> Dataset::serialize_records() const {
    binio::Writer w;
    for (std::size_t i = 0; i < samples_.size(); ++i) {
        const ChannelSample& s = samples_[i];
        const CIRTensor& cir = cirs_[i];
        w.put<std::uint32_t>(s.scenario_id);
        for (int k = 0; k < 3; ++k) w.put<double>(s.ue_position(k));
        w.put<std::uint8_t>(s.los_label ? 1 : 0);
        w.put<std::uint16_t>(static_cast<std::uint16_t>(s.beam_label));
        w.put<std::uint16_t>(static_cast<std::uint16_t>(s.paths.size()));
        for (const PathParams& p : s.paths) {
            w.put<float>(static_cast<float>(p.gain.real()));
            w.put<float>(static_cast<float>(p.gain.imag()));
            w.put<std::uint16_t>(static_cast<std::uint16_t>(p.delay_tap));
            w.put<float>(static_cast<float>(p.aod_az));
            w.put<float>(static_cast<float>(p.aod_el));
            w.put<float>(static_cast<float>(p.aoa_az));
            w.put<float>(static_cast<float>(p.aoa_el));
            w.put<std::uint8_t>(p.is_los ? 1 : 0);
        }
        for (Index pair = 0; pair < cir.n_pairs(); ++pair) {
            for (Index t = 0; t < cir.n_taps(); ++t) {
                w.put<float>(static_cast<float>(cir.data(pair, t).real()));
                w.put<float>(static_cast<float>(cir.data(pair, t).imag()));
            }
        }
    }
    return w.bytes();
}

void Dataset::write(const std::filesystem::path& manifest_path, const std::filesystem::path& records_path) const {
    const std::vector<char> bytes = serialize_records();
    binio::write_file_atomic(records_path, bytes.data(), bytes.size());
    binio::write_text_atomic(manifest_path, manifest_.to_json());
}

void Dataset::write(const std::filesystem::path& dir) const {
    write(dir / kManifestFile, dir / kRecordsFile);
}

Dataset Dataset::load(const std::filesystem::path& dir) {
    const std::vector<char> text = binio::read_file(dir / kManifestFile);
    Dataset d;
    d.manifest_ = DatasetManifest::from_json(std::string(text.begin(), text.end()));
    const std::vector<char> bytes = binio::read_file(dir / kRecordsFile);
    if (bytes.size() != d.manifest_.records_bytes) {
        throw DataError("records file size " + std::to_string(bytes.size()) + " differs from manifest (" +
                        std::to_string(d.manifest_.records_bytes) + ")");
    }
    if (binio::crc32_of(bytes.data(), bytes.size()) != d.manifest_.records_crc32) {
        throw DataError("records file checksum mismatch");
    }
    const LinkConfig& link = d.manifest_.link;
    binio::Reader r(bytes.data(), bytes.size());
    for (Index i = 0; i < d.manifest_.record_count; ++i) {
        ChannelSample s;
        s.scenario_id = r.get<std::uint32_t>();
        for (int k = 0; k < 3; ++k) s.ue_position(k) = r.get<double>();
        s.los_label = r.get<std::uint8_t>() != 0;
        s.beam_label = r.get<std::uint16_t>();
        const auto n_paths = r.get<std::uint16_t>();
        for (std::uint16_t k = 0; k < n_paths; ++k) {
            PathParams p;
            const float re = r.get<float>();
            const float im = r.get<float>();
            p.gain = {re, im};
            p.delay_tap = r.get<std::uint16_t>();
            p.aod_az = r.get<float>();
            p.aod_el = r.get<float>();
            p.aoa_az = r.get<float>();
            p.aoa_el = r.get<float>();
            p.is_los = r.get<std::uint8_t>() != 0;
            s.paths.push_back(p);
        }
        CIRTensor cir(link.ue.size(), link.bs.size(), link.n_taps);
        for (Index pair = 0; pair < cir.n_pairs(); ++pair) {
            for (Index t = 0; t < link.n_taps; ++t) {
                const float re = r.get<float>();
                const float im = r.get<float>();
                cir.data(pair, t) = {re, im};
            }
        }
        d.samples_.push_back(std::move(s));
        d.cirs_.push_back(std::move(cir));
    }
    if (r.remaining() != 0) throw DataError("records file has trailing bytes");
    return d;
}

CSITensor Dataset::csi(Index i) const { return cir_to_csi(cir(i), manifest_.link.n_subcarriers); }

ModelInput Dataset::raw_input(Index i, Modality m, double noise_std, std::uint64_t noise_seed) const {
    PairTensor t = m == Modality::csi ? static_cast<PairTensor>(csi(i)) : static_cast<PairTensor>(cir(i));
    if (noise_std > 0.0) {
        std::mt19937_64 rng(derive_seed(noise_seed, static_cast<std::uint64_t>(i)));
        std::normal_distribution<double> g(0.0, noise_std / std::sqrt(2.0));
        for (Index c = 0; c < t.data.cols(); ++c) {
            for (Index r = 0; r < t.data.rows(); ++r) {
                const double re = g(rng);
                const double im = g(rng);
                t.data(r, c) += cd(re, im);
            }
        }
    }
    return shape_input(t, n_bins());
}

NormStats Dataset::fit_stats(std::span<const Index> indices, Modality m) const {
    if (indices.empty()) throw ContractError("fit_stats: empty training split");
    std::vector<ModelInput> inputs;
    inputs.reserve(indices.size());
    for (Index i : indices) {
        if (i < 0 || i >= size()) throw ContractError("fit_stats: record index out of range");
        if (!manifest_.is_train.empty() && !manifest_.is_train[static_cast<std::size_t>(i)]) {
            throw ContractError("fit_stats: record " + std::to_string(i) + " belongs to the validation split");
        }
        inputs.push_back(raw_input(i, m));
    }
    return fit_norm_stats(inputs);
}

void Dataset::precompute(Modality m) {
    auto& cache = cache_[m == Modality::csi ? 0 : 1];
    cache.clear();
    cache.reserve(samples_.size());
    for (Index i = 0; i < size(); ++i) {
        cache.push_back(normalize(raw_input(i, m), manifest_.stats(m)).data.transpose().cast<float>());
    }
}

Batch Dataset::load_batch(std::span<const Index> indices, Modality m, double noise_std,
                          std::uint64_t noise_seed) const {
    const Index n = static_cast<Index>(indices.size());
    const Index hw = n_pairs() * n_bins();
    const auto& cache = cache_[m == Modality::csi ? 0 : 1];
    const NormStats& stats = manifest_.stats(m);
    Batch b;
    b.input.n = n;
    b.input.height = n_pairs();
    b.input.width = n_bins();
    b.input.data.resize(n * hw, 2);
    b.labels.positions.resize(n, 3);
    for (Index k = 0; k < n; ++k) {
        const Index i = indices[static_cast<std::size_t>(k)];
        if (i < 0 || i >= size()) throw ContractError("load_batch: record index " + std::to_string(i) + " out of range");
        if (noise_std == 0.0 && !cache.empty()) {
            b.input.data.middleRows(k * hw, hw) = cache[static_cast<std::size_t>(i)];
        } else {
            b.input.data.middleRows(k * hw, hw) =
                normalize(raw_input(i, m, noise_std, noise_seed), stats).data.transpose().cast<float>();
        }
        const ChannelSample& s = sample(i);
        b.labels.los.push_back(s.los_label ? 1 : 0);
        b.labels.beam.push_back(s.beam_label);
        b.labels.positions.row(k) = s.ue_position.transpose();
    }
    return b;
}

}  // namespace csiclip
