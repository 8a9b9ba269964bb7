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
#include <numbers>
#include <random>

#include "csiclip/chanmodel.hpp"
#include "csiclip/sigproc.hpp"
#include "oracles.hpp"

using namespace csiclip;

namespace {

ChannelSample sample_with(std::vector<PathParams> paths) {
    ChannelSample s;
    s.paths = std::move(paths);
    return s;
}

// Wrap to [-0.5, 0.5).
double wrap_half(double x) { return x - std::floor(x + 0.5); }

}  // namespace

TEST_CASE("steering vector: broadside, single element, per-element formula") {
    const VectorXcd a = steering_vector({2, 1, 0.5}, 0.0, 0.0);
    REQUIRE(a.size() == 2);
    CHECK(std::abs(a(0) - cd(1.0 / std::sqrt(2.0), 0.0)) < 1e-15);
    CHECK(std::abs(a(1) - cd(1.0 / std::sqrt(2.0), 0.0)) < 1e-15);

    const VectorXcd one = steering_vector({1, 1, 0.5}, 1.3, -0.4);
    REQUIRE(one.size() == 1);
    CHECK(std::abs(one(0) - cd(1.0, 0.0)) < 1e-15);

    const ArrayGeometry g{4, 4, 0.5};
    const VectorXcd v = steering_vector(g, 0.3, 0.1);
    const auto ref = oracle::steering(g, 0.3, 0.1);
    REQUIRE(v.size() == 16);
    for (Index i = 0; i < 16; ++i) CHECK(std::abs(v(i) - ref[static_cast<std::size_t>(i)]) < 1e-14);
    CHECK(std::abs(v.norm() - 1.0) < 1e-14);
}

TEST_CASE("codebook: unitarity, 2-point DFT, size errors") {
    for (const ArrayGeometry g : {ArrayGeometry{8, 8, 0.5}, ArrayGeometry{4, 4, 0.5}, ArrayGeometry{2, 1, 0.5},
                                  ArrayGeometry{3, 5, 0.5}}) {
        const Codebook cb = build_codebook(g, g.size());
        const MatrixXcd gram = cb.vectors.adjoint() * cb.vectors;
        CHECK((gram - MatrixXcd::Identity(g.size(), g.size())).cwiseAbs().maxCoeff() < 1e-12);
        for (Index b = 0; b < g.size(); ++b) {
            const auto ref = oracle::dft_beam(g, b);
            for (Index i = 0; i < g.size(); ++i) {
                CHECK(std::abs(cb.vectors(i, b) - ref[static_cast<std::size_t>(i)]) < 1e-13);
            }
        }
    }
    const Codebook two = build_codebook({1, 2, 0.5}, 2);
    const double h = 1.0 / std::sqrt(2.0);
    CHECK(std::abs(two.vectors(0, 0) - cd(h, 0)) < 1e-15);
    CHECK(std::abs(two.vectors(1, 0) - cd(h, 0)) < 1e-15);
    CHECK(std::abs(two.vectors(0, 1) - cd(h, 0)) < 1e-15);
    CHECK(std::abs(two.vectors(1, 1) - cd(-h, 0)) < 1e-15);
    CHECK_THROWS_AS(build_codebook({4, 4, 0.5}, 64), ConfigError);
}

TEST_CASE("synthesize_cir: scalar channel, energy identity, brute-force sum") {
    PathParams p;
    p.gain = cd(1.0, 0.0);
    const CIRTensor h = synthesize_cir(sample_with({p}), {1, 1, 0.5}, {1, 1, 0.5}, 8);
    CHECK(h.data(0, 0) == cd(1.0, 0.0));
    CHECK(h.data.rightCols(7).cwiseAbs().maxCoeff() == 0.0);

    p.gain = cd(2.0, 0.0);
    p.aod_az = 0.4;
    p.aoa_el = -0.2;
    CHECK(std::abs(synthesize_cir(sample_with({p}), {4, 4, 0.5}, {2, 1, 0.5}, 8).energy() - 4.0) < 1e-12);

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<PathParams> paths;
    for (Index t : {0, 3, 6}) {
        PathParams q;
        q.gain = cd(u(rng), u(rng));
        q.delay_tap = t;
        q.aod_az = u(rng);
        q.aod_el = u(rng);
        q.aoa_az = u(rng);
        q.aoa_el = u(rng);
        paths.push_back(q);
    }
    const ArrayGeometry g{2, 2, 0.5};
    const ChannelSample s = sample_with(paths);
    const CIRTensor cir = synthesize_cir(s, g, g, 8);
    double gains = 0.0;
    for (const auto& q : paths) gains += std::norm(q.gain);
    CHECK(std::abs(cir.energy() - gains) / gains < 1e-10);
    for (Index r = 0; r < 4; ++r) {
        for (Index t = 0; t < 4; ++t) {
            for (Index tap = 0; tap < 8; ++tap) {
                cd ref = 0.0;
                for (const auto& q : paths) {
                    if (q.delay_tap != tap) continue;
                    ref += q.gain * oracle::steering(g, q.aoa_az, q.aoa_el)[static_cast<std::size_t>(r)] *
                           std::conj(oracle::steering(g, q.aod_az, q.aod_el)[static_cast<std::size_t>(t)]);
                }
                CHECK(std::abs(cir(r, t, tap) - ref) < 1e-14);
            }
        }
    }

    paths[1].delay_tap = 8;
    CHECK_THROWS_AS(synthesize_cir(sample_with(paths), g, g, 8), GenerationError);
}

TEST_CASE("received power: zero, column selection, naive loop") {
    CSITensor zero(2, 4, 8);
    CHECK(received_power(zero, VectorXcd::Ones(4)) == 0.0);

    CSITensor eye(2, 2, 1);
    eye(0, 0, 0) = 1.0;
    eye(1, 1, 0) = 1.0;
    VectorXcd beam(2);
    beam << 1.0, 0.0;
    CHECK(received_power(eye, beam) == doctest::Approx(1.0).epsilon(1e-15));

    std::mt19937_64 rng(9);
    std::normal_distribution<double> n;
    CSITensor h(2, 4, 8);
    for (Index i = 0; i < h.data.size(); ++i) h.data.data()[i] = cd(n(rng), n(rng));
    VectorXcd s(4);
    for (Index i = 0; i < 4; ++i) s(i) = cd(n(rng), n(rng));
    s.normalize();
    double ref = 0.0;
    for (Index k = 0; k < 8; ++k) {
        for (Index r = 0; r < 2; ++r) {
            cd y = 0.0;
            for (Index t = 0; t < 4; ++t) y += h(r, t, k) * s(t);
            ref += std::norm(y);
        }
    }
    CHECK(std::abs(received_power(h, s) - ref) < 1e-12 * ref);
    CHECK_THROWS_AS(received_power(h, VectorXcd::Ones(3)), ContractError);
}

TEST_CASE("optimal beam: aligned path wins for every beam") {
    // Full-wavelength spacing makes every 2-D DFT beam reachable by a physical
    // direction; with half-wavelength spacing the (rows/2, q != 0) beams are not.
    for (const ArrayGeometry bs : {ArrayGeometry{8, 8, 1.0}, ArrayGeometry{4, 4, 1.0}}) {
        const ArrayGeometry ue{2, 2, 0.5};
        const Codebook cb = build_codebook(bs, bs.size());
        for (Index m = 0; m < bs.size(); ++m) {
            const double pr = wrap_half(static_cast<double>(m / bs.cols) / static_cast<double>(bs.rows));
            const double qc = wrap_half(static_cast<double>(m % bs.cols) / static_cast<double>(bs.cols));
            PathParams p;
            p.aod_el = std::asin(pr / bs.spacing);
            p.aod_az = std::asin(qc / (bs.spacing * std::cos(p.aod_el)));
            p.aoa_az = 0.3;
            p.delay_tap = 2;
            const VectorXcd a = steering_vector(bs, p.aod_az, p.aod_el);
            REQUIRE(std::abs(std::abs(a.dot(cb.vectors.col(m))) - 1.0) < 1e-12);
            const CSITensor csi = cir_to_csi(synthesize_cir(sample_with({p}), bs, ue, 8), 16);
            CHECK(optimal_beam(csi, cb) == m);
            CHECK(oracle::best_beam(oracle::csi_direct(sample_with({p}), bs, ue, 16), bs) == m);
        }
    }
}

TEST_CASE("optimal beam: outer product with s(3), zero tie-break") {
    const ArrayGeometry bs{4, 4, 0.5};
    const Codebook cb = build_codebook(bs, 16);
    CSITensor h(2, 16, 4);
    for (Index k = 0; k < 4; ++k) {
        for (Index r = 0; r < 2; ++r) {
            for (Index t = 0; t < 16; ++t) h(r, t, k) = cd(1.0 + r, -0.5 * k) * std::conj(cb.vectors(t, 3));
        }
    }
    CHECK(optimal_beam(h, cb) == 3);
    CHECK(optimal_beam(CSITensor(2, 16, 4), cb) == 0);
    const Eigen::VectorXd p = beam_powers(h, cb);
    for (Index b = 0; b < 16; ++b) {
        if (b != 3) CHECK(p(b) < 1e-20);
    }
}

TEST_CASE("generate_scenario: determinism, counts, forced NLoS, invariants") {
    ScenarioConfig c;
    c.n_ue = 100;
    const auto a = generate_scenario(c, 42);
    const auto b = generate_scenario(c, 42);
    REQUIRE(a.size() == 100);
    CHECK(a == b);
    CHECK_FALSE(a == generate_scenario(c, 43));

    const Codebook cb = build_codebook(c.link.bs, c.link.n_beams);
    for (const auto& s : a) {
        REQUIRE(!s.paths.empty());
        REQUIRE(static_cast<Index>(s.paths.size()) <= kMaxPaths);
        Index n_los = 0;
        Index min_tap = s.paths.front().delay_tap;
        for (const auto& p : s.paths) {
            CHECK(std::abs(p.gain) > 0.0);
            CHECK(p.delay_tap >= 0);
            CHECK(p.delay_tap < c.link.n_taps);
            n_los += p.is_los ? 1 : 0;
            min_tap = std::min(min_tap, p.delay_tap);
        }
        CHECK(n_los <= 1);
        CHECK(s.los_label == (n_los == 1));
        if (s.los_label) {
            for (const auto& p : s.paths) {
                if (p.is_los) CHECK(p.delay_tap == min_tap);
                else CHECK(p.delay_tap > min_tap);
            }
        }
        const double horiz = std::hypot(s.ue_position.x() - c.bs_position.x(), s.ue_position.y() - c.bs_position.y());
        CHECK(horiz >= c.min_distance - 1e-9);
        CHECK(horiz <= c.cell_radius + 1e-9);
        CHECK(s.beam_label == optimal_beam(cir_to_csi(synthesize_cir(s, c.link.bs, c.link.ue, c.link.n_taps),
                                                      c.link.n_subcarriers),
                                           cb));
    }

    c.blockage_probability = 1.0;
    for (const auto& s : generate_scenario(c, 1)) CHECK_FALSE(s.los_label);
}

TEST_CASE("generate_scenario: sample streams are independent of the UE count") {
    ScenarioConfig c;
    c.n_ue = 10;
    const auto small = generate_scenario(c, 7);
    c.n_ue = 30;
    const auto large = generate_scenario(c, 7);
    for (std::size_t i = 0; i < small.size(); ++i) CHECK(small[i] == large[i]);
}

TEST_CASE("scenario validation names the field") {
    ScenarioConfig c;
    c.blockage_probability = 1.5;
    try {
        c.validate();
        FAIL("expected a ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("blockage_probability") != std::string::npos);
    }
    c = ScenarioConfig{};
    c.paths_max = 21;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = ScenarioConfig{};
    c.n_ue = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("delays beyond the tap grid raise a generation error naming the sample") {
    ScenarioConfig c;
    c.link.n_taps = 4;
    c.link.n_subcarriers = 8;
    c.cell_radius = 2000.0;
    c.n_ue = 20;
    c.blockage_probability = 0.0;
    try {
        generate_scenario(c, 3);
        FAIL("expected a GenerationError");
    } catch (const GenerationError& e) {
        CHECK(std::string(e.what()).find("sample") != std::string::npos);
    }
}
