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

#include "csiclip/sigproc.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

namespace csiclip {

std::string to_string(Modality m) { return m == Modality::csi ? "csi" : "cir"; }

Modality modality_from_string(const std::string& s) {
    if (s == "csi") return Modality::csi;
    if (s == "cir") return Modality::cir;
    throw ConfigError("unknown modality '" + s + "' (expected csi or cir)");
}

const MatrixXcd& dft_matrix(Index size) {
    static std::mutex mutex;
    static std::map<Index, std::unique_ptr<MatrixXcd>> cache;
    std::lock_guard lock(mutex);
    auto& slot = cache[size];
    if (!slot) {
        auto f = std::make_unique<MatrixXcd>(size, size);
        for (Index t = 0; t < size; ++t) {
            for (Index k = 0; k < size; ++k) {
                const double angle =
                    -2.0 * std::numbers::pi * static_cast<double>((k * t) % size) / static_cast<double>(size);
                (*f)(t, k) = std::polar(1.0, angle);
            }
        }
        slot = std::move(f);
    }
    return *slot;
}

CSITensor cir_to_csi(const CIRTensor& cir, Index n_subcarriers) {
    if (cir.n_taps() > n_subcarriers) {
        throw ContractError("cir_to_csi: n_taps (" + std::to_string(cir.n_taps()) +
                            ") exceeds n_subcarriers (" + std::to_string(n_subcarriers) + ")");
    }
    const MatrixXcd& f = dft_matrix(n_subcarriers);
    CSITensor csi;
    csi.n_rx = cir.n_rx;
    csi.n_tx = cir.n_tx;
    csi.data = cir.data * f.topRows(cir.n_taps());
    return csi;
}

CIRTensor csi_to_cir(const CSITensor& csi, Index n_taps) {
    const Index k = csi.n_subcarriers();
    if (n_taps < 1 || n_taps > k) {
        throw ContractError("csi_to_cir: n_taps must lie in [1, n_subcarriers]");
    }
    // F is symmetric, so the inverse transform uses conj(F) restricted to the kept taps.
    const MatrixXcd& f = dft_matrix(k);
    CIRTensor cir;
    cir.n_rx = csi.n_rx;
    cir.n_tx = csi.n_tx;
    cir.data = (csi.data * f.leftCols(n_taps).conjugate()) / static_cast<double>(k);
    return cir;
}

ModelInput shape_input(const PairTensor& tensor, Index n_bins) {
    if (tensor.n_bins() > n_bins) {
        throw ContractError("shape_input: tensor has more bins than the input width");
    }
    ModelInput in;
    in.n_pairs = tensor.n_pairs();
    in.n_bins = n_bins;
    in.data = Eigen::MatrixXd::Zero(2, in.n_pairs * n_bins);
    for (Index p = 0; p < in.n_pairs; ++p) {
        for (Index b = 0; b < tensor.n_bins(); ++b) {
            const cd v = tensor.data(p, b);
            in.data(0, p * n_bins + b) = v.real();
            in.data(1, p * n_bins + b) = v.imag();
        }
    }
    return in;
}

PairTensor unshape_input(const ModelInput& input, Index n_rx, Index n_tx, Index n_bins) {
    if (n_rx * n_tx != input.n_pairs || n_bins > input.n_bins) {
        throw ContractError("unshape_input: shape does not match the model input");
    }
    PairTensor t(n_rx, n_tx, n_bins);
    for (Index p = 0; p < input.n_pairs; ++p) {
        for (Index b = 0; b < n_bins; ++b) {
            t.data(p, b) = {input.at(0, p, b), input.at(1, p, b)};
        }
    }
    return t;
}

void NormStats::validate() const {
    if (!(max > min) || !(std > 0.0) || !std::isfinite(mean)) {
        throw DataError("degenerate normalization statistics (constant data)");
    }
}

NormStats fit_norm_stats(std::span<const ModelInput> training) {
    if (training.empty()) throw ContractError("fit_norm_stats: empty training split");
    double lo = training.front().data(0, 0);
    double hi = lo;
    double sum = 0.0;
    double count = 0.0;
    for (const ModelInput& in : training) {
        lo = std::min(lo, in.data.minCoeff());
        hi = std::max(hi, in.data.maxCoeff());
        sum += in.data.sum();
        count += static_cast<double>(in.data.size());
    }
    const double mean = sum / count;
    double sq = 0.0;
    for (const ModelInput& in : training) {
        sq += (in.data.array() - mean).square().sum();
    }
    const double sd = std::sqrt(sq / count);
    if (!(hi > lo) || !(sd > 0.0)) {
        throw DataError("fit_norm_stats: training data is constant");
    }
    NormStats s;
    s.min = lo;
    s.max = hi;
    s.mean = (mean - lo) / (hi - lo);
    s.std = sd / (hi - lo);
    return s;
}

double normalize_value(double x, const NormStats& stats) {
    return ((x - stats.min) / (stats.max - stats.min) - stats.mean) / stats.std;
}

ModelInput normalize(const ModelInput& x, const NormStats& stats) {
    ModelInput y = x;
    y.data = x.data.unaryExpr([&](double v) { return normalize_value(v, stats); });
    return y;
}

}  // namespace csiclip
