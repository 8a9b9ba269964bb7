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

#include "csiclip/checkpoint.hpp"

#include "binio.hpp"

namespace csiclip {

namespace {
constexpr char kMagic[] = "CSICLIPK";
}

void Checkpoint::add_tensor(const std::string& name, const Mat<float>& value) {
    for (auto& t : tensors) {
        if (t.name == name) {
            t.value = value;
            return;
        }
    }
    tensors.push_back({name, value});
}

bool Checkpoint::has_tensor(const std::string& name) const {
    for (const auto& t : tensors) {
        if (t.name == name) return true;
    }
    return false;
}

const Mat<float>& Checkpoint::tensor(const std::string& name) const {
    for (const auto& t : tensors) {
        if (t.name == name) return t.value;
    }
    throw DataError("checkpoint has no tensor '" + name + "'");
}

double Checkpoint::scalar(const std::string& name) const {
    const auto it = scalars.find(name);
    if (it == scalars.end()) throw DataError("checkpoint has no scalar '" + name + "'");
    return it->second;
}

void Checkpoint::add_parameters(const std::string& prefix, const std::vector<Parameter<float>>& params) {
    for (const auto& p : params) add_tensor(prefix + p.name, p.value);
}

void Checkpoint::load_parameters(const std::string& prefix, std::vector<Parameter<float>>& params) const {
    for (auto& p : params) {
        const Mat<float>& v = tensor(prefix + p.name);
        if (v.rows() != p.value.rows() || v.cols() != p.value.cols()) {
            throw DataError("checkpoint tensor '" + prefix + p.name + "' has shape " + std::to_string(v.rows()) +
                            "x" + std::to_string(v.cols()) + ", expected " + std::to_string(p.value.rows()) +
                            "x" + std::to_string(p.value.cols()));
        }
        p.value = v;
    }
}

void Checkpoint::add_optimizer(const std::string& prefix, const AdamW<float>& opt) {
    scalars[prefix + "step"] = static_cast<double>(opt.step_count());
    scalars[prefix + "lr"] = opt.learning_rate();
    scalars[prefix + "n_moments"] = static_cast<double>(opt.first_moments().size());
    for (std::size_t i = 0; i < opt.first_moments().size(); ++i) {
        add_tensor(prefix + "m/" + std::to_string(i), opt.first_moments()[i]);
        add_tensor(prefix + "v/" + std::to_string(i), opt.second_moments()[i]);
    }
}

void Checkpoint::load_optimizer(const std::string& prefix, AdamW<float>& opt) const {
    opt.set_step_count(static_cast<std::uint64_t>(scalar(prefix + "step")));
    opt.set_learning_rate(scalar(prefix + "lr"));
    const auto n = static_cast<std::size_t>(scalar(prefix + "n_moments"));
    opt.first_moments().clear();
    opt.second_moments().clear();
    for (std::size_t i = 0; i < n; ++i) {
        opt.first_moments().push_back(tensor(prefix + "m/" + std::to_string(i)));
        opt.second_moments().push_back(tensor(prefix + "v/" + std::to_string(i)));
    }
}

std::vector<char> Checkpoint::serialize() const {
    binio::Writer w;
    w.put_raw(std::string_view(kMagic, 8));
    w.put<std::uint32_t>(kVersion);
    w.put_string(kind);
    w.put_string(config_echo);
    w.put<std::uint64_t>(epoch);
    w.put_string(rng_state);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(scalars.size()));
    for (const auto& [name, value] : scalars) {
        w.put_string(name);
        w.put<double>(value);
    }
    w.put<std::uint32_t>(static_cast<std::uint32_t>(tensors.size()));
    for (const auto& t : tensors) {
        w.put_string(t.name);
        w.put<std::uint32_t>(static_cast<std::uint32_t>(t.value.rows()));
        w.put<std::uint32_t>(static_cast<std::uint32_t>(t.value.cols()));
        for (Index r = 0; r < t.value.rows(); ++r) {
            for (Index c = 0; c < t.value.cols(); ++c) w.put<float>(t.value(r, c));
        }
    }
    std::vector<char> bytes = w.bytes();
    const std::uint32_t crc = binio::crc32_of(bytes.data(), bytes.size());
    const auto* p = reinterpret_cast<const char*>(&crc);
    bytes.insert(bytes.end(), p, p + 4);
    return bytes;
}

Checkpoint Checkpoint::deserialize(const std::vector<char>& bytes) {
    if (bytes.size() < 16) throw DataError("checkpoint too short");
    binio::Reader trailer(bytes.data() + bytes.size() - 4, 4);
    if (trailer.get<std::uint32_t>() != binio::crc32_of(bytes.data(), bytes.size() - 4)) {
        throw DataError("checkpoint checksum mismatch");
    }
    binio::Reader r(bytes.data(), bytes.size() - 4);
    if (r.get_raw(8) != std::string_view(kMagic, 8)) throw DataError("not a checkpoint file");
    const auto version = r.get<std::uint32_t>();
    if (version != kVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));
    Checkpoint ck;
    ck.kind = r.get_string();
    ck.config_echo = r.get_string();
    ck.epoch = r.get<std::uint64_t>();
    ck.rng_state = r.get_string();
    const auto n_scalars = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < n_scalars; ++i) {
        std::string name = r.get_string();
        ck.scalars[name] = r.get<double>();
    }
    const auto n_tensors = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < n_tensors; ++i) {
        Tensor t;
        t.name = r.get_string();
        const auto rows = r.get<std::uint32_t>();
        const auto cols = r.get<std::uint32_t>();
        t.value.resize(rows, cols);
        for (Index rr = 0; rr < rows; ++rr) {
            for (Index c = 0; c < cols; ++c) t.value(rr, c) = r.get<float>();
        }
        ck.tensors.push_back(std::move(t));
    }
    if (r.remaining() != 0) throw DataError("trailing bytes in checkpoint");
    return ck;
}

void Checkpoint::save(const std::filesystem::path& path) const {
    const std::vector<char> bytes = serialize();
    binio::write_file_atomic(path, bytes.data(), bytes.size());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
    return deserialize(binio::read_file(path));
}

}  // namespace csiclip
