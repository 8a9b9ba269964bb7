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

// Independent reference implementations shared by the unit and acceptance tests.
// They use plain loops over the textbook formulas and none of the library's
// vectorized code paths.

#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

#include "csiclip/chanmodel.hpp"

namespace oracle {

using cd = std::complex<double>;
using csiclip::Index;

inline std::vector<cd> steering(const csiclip::ArrayGeometry& g, double az, double el) {
    std::vector<cd> v;
    const double norm = 1.0 / std::sqrt(static_cast<double>(g.rows * g.cols));
    for (Index r = 0; r < g.rows; ++r) {
        for (Index c = 0; c < g.cols; ++c) {
            const double phase = 2.0 * std::numbers::pi * g.spacing *
                                 (static_cast<double>(r) * std::sin(el) + static_cast<double>(c) * std::cos(el) * std::sin(az));
            v.push_back(norm * std::polar(1.0, phase));
        }
    }
    return v;
}

// Column b of the 2-D DFT codebook: beam b = p * cols + q.
inline std::vector<cd> dft_beam(const csiclip::ArrayGeometry& g, Index b) {
    const Index p = b / g.cols, q = b % g.cols;
    std::vector<cd> v;
    const double norm = 1.0 / std::sqrt(static_cast<double>(g.rows * g.cols));
    for (Index r = 0; r < g.rows; ++r) {
        for (Index c = 0; c < g.cols; ++c) {
            const double phase = 2.0 * std::numbers::pi *
                                 (static_cast<double>(p * r) / static_cast<double>(g.rows) +
                                  static_cast<double>(q * c) / static_cast<double>(g.cols));
            v.push_back(norm * std::polar(1.0, phase));
        }
    }
    return v;
}

// H[rx][tx][k] = sum over paths of gain * a_rx[rx] * conj(a_tx[tx]) * exp(-j 2 pi k tap / K).
inline std::vector<std::vector<std::vector<cd>>> csi_direct(const csiclip::ChannelSample& s,
                                                            const csiclip::ArrayGeometry& tx,
                                                            const csiclip::ArrayGeometry& rx, Index K) {
    std::vector<std::vector<std::vector<cd>>> h(
        static_cast<std::size_t>(rx.size()),
        std::vector<std::vector<cd>>(static_cast<std::size_t>(tx.size()), std::vector<cd>(static_cast<std::size_t>(K))));
    for (const auto& p : s.paths) {
        const auto at = steering(tx, p.aod_az, p.aod_el);
        const auto ar = steering(rx, p.aoa_az, p.aoa_el);
        for (Index k = 0; k < K; ++k) {
            const cd rot = std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k * p.delay_tap % K) /
                                               static_cast<double>(K));
            for (Index r = 0; r < rx.size(); ++r) {
                for (Index t = 0; t < tx.size(); ++t) {
                    h[r][t][k] += p.gain * ar[r] * std::conj(at[t]) * rot;
                }
            }
        }
    }
    return h;
}

// Exhaustive sweep P(b) = sum_k || H_k s(b) ||^2, first maximum wins.
inline Index best_beam(const std::vector<std::vector<std::vector<cd>>>& h, const csiclip::ArrayGeometry& tx) {
    const Index n_beams = tx.size();
    Index best = 0;
    double best_p = -1.0;
    for (Index b = 0; b < n_beams; ++b) {
        const auto s = dft_beam(tx, b);
        double power = 0.0;
        const std::size_t K = h[0][0].size();
        for (std::size_t k = 0; k < K; ++k) {
            for (std::size_t r = 0; r < h.size(); ++r) {
                cd y = 0.0;
                for (std::size_t t = 0; t < h[r].size(); ++t) y += h[r][t][k] * s[t];
                power += std::norm(y);
            }
        }
        if (power > best_p) {
            best_p = power;
            best = b;
        }
    }
    return best;
}

}  // namespace oracle
