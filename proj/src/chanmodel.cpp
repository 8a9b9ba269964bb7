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

#include "csiclip/chanmodel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "csiclip/sigproc.hpp"

namespace csiclip {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

template <typename... Args>
std::string cat(const Args&... args) {
    std::ostringstream os;
    (os << ... << args);
    return os.str();
}

// Stored path parameters are float32 on disk; rounding at generation time keeps
// in-memory samples identical to what a reload produces.
// The volatile store keeps GCC 11's SLP vectorizer from folding the round trip away.
double to_f32(double v) {
    volatile float f = static_cast<float>(v);
    return f;
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Index uniform_int(std::mt19937_64& rng, Index lo, Index hi) {
    return std::uniform_int_distribution<Index>(lo, hi)(rng);
}

// Uniform-by-area point in the annular sector in front of the BS.
Vector3d sample_in_sector(std::mt19937_64& rng, const ScenarioConfig& cfg, double z) {
    const double r0 = cfg.min_distance;
    const double r1 = cfg.cell_radius;
    const double r = std::sqrt(uniform(rng, 0.0, 1.0) * (r1 * r1 - r0 * r0) + r0 * r0);
    const double phi = uniform(rng, -cfg.sector_half_angle, cfg.sector_half_angle);
    return {cfg.bs_position.x() + r * std::cos(phi), cfg.bs_position.y() + r * std::sin(phi), z};
}

void direction_angles(const Vector3d& from, const Vector3d& to, double& az, double& el) {
    const Vector3d d = to - from;
    az = std::atan2(d.y(), d.x());
    el = std::atan2(d.z(), std::hypot(d.x(), d.y()));
}

}  // namespace

void ArrayGeometry::validate(const std::string& what) const {
    if (rows < 1 || cols < 1) {
        throw ConfigError(cat(what, ": rows and cols must be >= 1 (got ", rows, "x", cols, ")"));
    }
    if (!(spacing > 0.0) || !std::isfinite(spacing)) {
        throw ConfigError(cat(what, ": spacing must be positive (got ", spacing, ")"));
    }
}

void LinkConfig::validate() const {
    bs.validate("bs_array");
    ue.validate("ue_array");
    if (n_taps < 1) throw ConfigError(cat("n_taps must be >= 1 (got ", n_taps, ")"));
    if (n_subcarriers < n_taps) {
        throw ConfigError(cat("n_subcarriers (", n_subcarriers, ") must be >= n_taps (", n_taps, ")"));
    }
    if (!(bandwidth_hz > 0.0)) throw ConfigError("bandwidth_hz must be positive");
    if (n_beams != bs.size()) {
        throw ConfigError(cat("codebook_size must equal bs rows*cols (", bs.size(), "), got ", n_beams));
    }
}

void ScenarioConfig::validate() const {
    link.validate();
    const std::string where = "scenario '" + name + "': ";
    if (n_ue < 1) throw ConfigError(where + "n_ue must be > 0");
    if (!(cell_radius > min_distance) || min_distance < 0.0) {
        throw ConfigError(where + "cell_radius must exceed min_distance >= 0");
    }
    if (!(sector_half_angle > 0.0) || sector_half_angle > std::numbers::pi) {
        throw ConfigError(where + "sector_half_angle must lie in (0, pi]");
    }
    if (paths_min < 1 || paths_max < paths_min || paths_max > kMaxPaths) {
        throw ConfigError(cat(where, "path count range must satisfy 1 <= paths_min <= paths_max <= ",
                              kMaxPaths));
    }
    if (scatterers_min < paths_max || scatterers_max < scatterers_min) {
        throw ConfigError(where + "scatterer count range must satisfy paths_max <= scatterers_min <= scatterers_max");
    }
    if (!(blockage_probability >= 0.0 && blockage_probability <= 1.0)) {
        throw ConfigError(cat(where, "blockage_probability must lie in [0, 1] (got ",
                              blockage_probability, ")"));
    }
    if (!(pathloss_exponent_los > 0.0) || !(pathloss_exponent_nlos > 0.0)) {
        throw ConfigError(where + "path-loss exponents must be positive");
    }
    if (!(scatterer_max_height >= 0.0)) throw ConfigError(where + "scatterer_max_height must be >= 0");
}

VectorXcd steering_vector(const ArrayGeometry& geometry, double az, double el) {
    const double norm = 1.0 / std::sqrt(static_cast<double>(geometry.size()));
    const double u = std::sin(el);
    const double v = std::cos(el) * std::sin(az);
    VectorXcd a(geometry.size());
    for (Index r = 0; r < geometry.rows; ++r) {
        for (Index c = 0; c < geometry.cols; ++c) {
            const double phase = kTwoPi * geometry.spacing * (r * u + c * v);
            a(r * geometry.cols + c) = std::polar(norm, phase);
        }
    }
    return a;
}

Codebook build_codebook(const ArrayGeometry& geometry, Index beams) {
    geometry.validate();
    if (beams != geometry.size()) {
        throw ConfigError(cat("codebook size ", beams, " != rows*cols = ", geometry.size()));
    }
    auto dft_basis = [](Index n) {
        MatrixXcd f(n, n);
        const double norm = 1.0 / std::sqrt(static_cast<double>(n));
        for (Index e = 0; e < n; ++e) {
            for (Index p = 0; p < n; ++p) {
                f(e, p) = std::polar(norm, kTwoPi * static_cast<double>((e * p) % n) / n);
            }
        }
        return f;
    };
    const MatrixXcd fr = dft_basis(geometry.rows);
    const MatrixXcd fc = dft_basis(geometry.cols);
    Codebook cb{geometry, MatrixXcd(geometry.size(), beams)};
    for (Index p = 0; p < geometry.rows; ++p) {
        for (Index q = 0; q < geometry.cols; ++q) {
            auto col = cb.vectors.col(p * geometry.cols + q);
            for (Index r = 0; r < geometry.rows; ++r) {
                col.segment(r * geometry.cols, geometry.cols) = fr(r, p) * fc.col(q);
            }
        }
    }
    return cb;
}

CIRTensor synthesize_cir(const ChannelSample& sample, const ArrayGeometry& tx,
                         const ArrayGeometry& rx, Index n_taps) {
    if (sample.paths.empty()) throw GenerationError("sample has no propagation paths");
    CIRTensor cir(rx.size(), tx.size(), n_taps);
    for (const PathParams& p : sample.paths) {
        if (p.delay_tap < 0 || p.delay_tap >= n_taps) {
            throw GenerationError(cat("delay tap ", p.delay_tap, " outside grid [0, ", n_taps, ")"));
        }
        const VectorXcd a_rx = steering_vector(rx, p.aoa_az, p.aoa_el);
        const VectorXcd a_tx = steering_vector(tx, p.aod_az, p.aod_el);
        for (Index r = 0; r < rx.size(); ++r) {
            cir.data.col(p.delay_tap).segment(r * tx.size(), tx.size()) +=
                (p.gain * a_rx(r)) * a_tx.conjugate();
        }
    }
    return cir;
}

double received_power(const CSITensor& csi, const VectorXcd& beam) {
    if (beam.size() != csi.n_tx) {
        throw ContractError(cat("beam length ", beam.size(), " != n_tx ", csi.n_tx));
    }
    double power = 0.0;
    for (Index r = 0; r < csi.n_rx; ++r) {
        power += (beam.transpose() * csi.data.middleRows(r * csi.n_tx, csi.n_tx)).squaredNorm();
    }
    return power;
}

Eigen::VectorXd beam_powers(const CSITensor& csi, const Codebook& codebook) {
    if (codebook.vectors.rows() != csi.n_tx) {
        throw ContractError(cat("codebook tx dimension ", codebook.vectors.rows(), " != n_tx ", csi.n_tx));
    }
    Eigen::VectorXd powers = Eigen::VectorXd::Zero(codebook.size());
    for (Index r = 0; r < csi.n_rx; ++r) {
        const MatrixXcd y = codebook.vectors.transpose() * csi.data.middleRows(r * csi.n_tx, csi.n_tx);
        powers += y.rowwise().squaredNorm();
    }
    return powers;
}

Index optimal_beam(const CSITensor& csi, const Codebook& codebook) {
    const Eigen::VectorXd powers = beam_powers(csi, codebook);
    Index best = 0;
    for (Index b = 1; b < powers.size(); ++b) {
        if (powers(b) > powers(best)) best = b;
    }
    return best;
}

std::vector<ChannelSample> generate_scenario(const ScenarioConfig& config, std::uint64_t seed) {
    config.validate();
    const LinkConfig& link = config.link;
    const Codebook codebook = build_codebook(link.bs, link.n_beams);
    const double tap_len = link.tap_length_m();
    const Vector3d& bs = config.bs_position;

    std::mt19937_64 field_rng(derive_seed(~seed, 0));
    const Index n_scat = uniform_int(field_rng, config.scatterers_min, config.scatterers_max);
    std::vector<Vector3d> scatterers;
    scatterers.reserve(static_cast<std::size_t>(n_scat));
    for (Index s = 0; s < n_scat; ++s) {
        const double z = uniform(field_rng, 0.0, config.scatterer_max_height);
        scatterers.push_back(sample_in_sector(field_rng, config, z));
    }

    std::vector<ChannelSample> samples;
    samples.reserve(static_cast<std::size_t>(config.n_ue));
    for (Index i = 0; i < config.n_ue; ++i) {
        std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
        ChannelSample sample;
        sample.scenario_id = config.id;
        sample.ue_position = sample_in_sector(rng, config, config.ue_height);
        const Index n_total = uniform_int(rng, config.paths_min, config.paths_max);
        const bool has_los = uniform(rng, 0.0, 1.0) >= config.blockage_probability;
        const Vector3d& ue = sample.ue_position;

        auto make_path = [&](double length, double exponent, const Vector3d& first,
                             const Vector3d& last, bool los) {
            PathParams p;
            p.is_los = los;
            p.delay_tap = static_cast<Index>(std::lround(length / tap_len));
            const double amplitude = std::pow(length, -0.5 * exponent);
            const cd g = std::polar(amplitude, uniform(rng, 0.0, kTwoPi));
            p.gain = {to_f32(g.real()), to_f32(g.imag())};
            direction_angles(bs, first, p.aod_az, p.aod_el);
            direction_angles(ue, last, p.aoa_az, p.aoa_el);
            p.aod_az = to_f32(p.aod_az);
            p.aod_el = to_f32(p.aod_el);
            p.aoa_az = to_f32(p.aoa_az);
            p.aoa_el = to_f32(p.aoa_el);
            return p;
        };

        Index los_tap = -1;
        if (has_los) {
            PathParams los = make_path((ue - bs).norm(), config.pathloss_exponent_los, ue, bs, true);
            los_tap = los.delay_tap;
            sample.paths.push_back(los);
        }

        // Strongest single-bounce paths first; a scatterer whose tap would tie
        // the LoS tap is rejected in favour of the next candidate.
        std::vector<std::pair<double, Index>> candidates;
        candidates.reserve(scatterers.size());
        for (Index s = 0; s < n_scat; ++s) {
            const Vector3d& sc = scatterers[static_cast<std::size_t>(s)];
            candidates.emplace_back((sc - bs).norm() + (ue - sc).norm(), s);
        }
        std::sort(candidates.begin(), candidates.end());
        const Index n_nlos = has_los ? n_total - 1 : n_total;
        Index taken = 0;
        for (const auto& [length, s] : candidates) {
            if (taken == n_nlos) break;
            if (has_los && std::lround(length / tap_len) <= los_tap) continue;
            const Vector3d& sc = scatterers[static_cast<std::size_t>(s)];
            sample.paths.push_back(make_path(length, config.pathloss_exponent_nlos, sc, sc, false));
            ++taken;
        }
        if (sample.paths.empty()) {
            throw GenerationError(cat("scenario '", config.name, "' sample ", i, ": no usable path"));
        }
        for (const PathParams& p : sample.paths) {
            if (p.delay_tap >= link.n_taps) {
                throw GenerationError(cat("scenario '", config.name, "' sample ", i, ": delay tap ",
                                          p.delay_tap, " exceeds the grid (n_taps = ", link.n_taps, ")"));
            }
        }
        sample.los_label = has_los;
        const CIRTensor cir = synthesize_cir(sample, link.bs, link.ue, link.n_taps);
        sample.beam_label = optimal_beam(cir_to_csi(cir, link.n_subcarriers), codebook);
        samples.push_back(std::move(sample));
    }
    return samples;
}

}  // namespace csiclip
