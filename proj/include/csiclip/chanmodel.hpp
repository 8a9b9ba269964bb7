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
#include <string>
#include <vector>

#include "csiclip/tensors.hpp"

namespace csiclip {

inline constexpr Index kMaxPaths = 20;
inline constexpr double kSpeedOfLight = 299792458.0;

// Uniform planar array. Element (r, c) sits at flat index r * cols + c.
struct ArrayGeometry {
    Index rows = 1;
    Index cols = 1;
    double spacing = 0.5;  // wavelengths

    Index size() const { return rows * cols; }
    void validate(const std::string& what = "array") const;
    bool operator==(const ArrayGeometry&) const = default;
};

struct PathParams {
    cd gain{1.0, 0.0};
    Index delay_tap = 0;
    double aod_az = 0.0;
    double aod_el = 0.0;
    double aoa_az = 0.0;
    double aoa_el = 0.0;
    bool is_los = false;

    bool operator==(const PathParams&) const = default;
};

struct ChannelSample {
    std::uint32_t scenario_id = 0;
    Vector3d ue_position = Vector3d::Zero();
    std::vector<PathParams> paths;
    bool los_label = false;
    Index beam_label = 0;

    bool operator==(const ChannelSample&) const = default;
};

struct Codebook {
    ArrayGeometry geometry;
    MatrixXcd vectors;  // n_tx x B, one unit-norm beam per column

    Index size() const { return vectors.cols(); }
};

// Settings shared by every scenario of a dataset.
struct LinkConfig {
    ArrayGeometry bs{4, 4, 0.5};
    ArrayGeometry ue{2, 1, 0.5};
    Index n_taps = 32;
    Index n_subcarriers = 64;
    double bandwidth_hz = 10e6;
    Index n_beams = 16;

    double tap_length_m() const { return kSpeedOfLight / bandwidth_hz; }
    void validate() const;
};

struct ScenarioConfig {
    std::string name = "scenario";
    std::uint32_t id = 0;
    LinkConfig link;

    Vector3d bs_position{0.0, 0.0, 25.0};
    double cell_radius = 200.0;      // m, UEs and scatterers lie within it
    double min_distance = 10.0;      // m, horizontal UE exclusion around the BS
    double sector_half_angle = 1.0;  // rad, around the array boresight (+x)
    double ue_height = 1.5;
    double scatterer_max_height = 20.0;

    Index n_ue = 100;
    Index scatterers_min = 20;  // size of the per-scenario scatterer field
    Index scatterers_max = 40;
    Index paths_min = 1;
    Index paths_max = 8;
    double blockage_probability = 0.3;
    double pathloss_exponent_los = 2.0;
    double pathloss_exponent_nlos = 3.5;

    void validate() const;
};

// Unit-norm UPA response toward (az, el): element (r, c) carries phase
// 2*pi*spacing*(r*sin(el) + c*cos(el)*sin(az)).
VectorXcd steering_vector(const ArrayGeometry& geometry, double az, double el);

// Kronecker product of the rows-point and cols-point unitary DFT bases.
// Beam b = p * cols + q pairs row frequency p with column frequency q.
Codebook build_codebook(const ArrayGeometry& geometry, Index beams);

// h[:, :, t] = sum over paths at tap t of gain * a_rx(aoa) * a_tx(aod)^H.
CIRTensor synthesize_cir(const ChannelSample& sample, const ArrayGeometry& tx,
                         const ArrayGeometry& rx, Index n_taps);

// Wideband received power sum_k ||H[:, :, k] * beam||^2.
double received_power(const CSITensor& csi, const VectorXcd& beam);

// Received power of every codebook beam.
Eigen::VectorXd beam_powers(const CSITensor& csi, const Codebook& codebook);

// argmax_b received_power; ties resolve to the lowest index.
Index optimal_beam(const CSITensor& csi, const Codebook& codebook);

// Pure function of (config, seed). Sample i draws from its own stream
// derive_seed(seed, i); the scatterer field draws from a dedicated stream.
std::vector<ChannelSample> generate_scenario(const ScenarioConfig& config,
                                             std::uint64_t seed);

}  // namespace csiclip
