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

#include <span>
#include <string>

#include "csiclip/tensors.hpp"

namespace csiclip {

enum class Modality { csi, cir };

std::string to_string(Modality m);
Modality modality_from_string(const std::string& s);

// Forward DFT with negative exponent and no 1/K factor, taps zero-padded to K:
// H[k] = sum_t h[t] exp(-j 2 pi k t / K).
CSITensor cir_to_csi(const CIRTensor& cir, Index n_subcarriers);

// Inverse DFT (carries the 1/K factor), truncated to the first n_taps taps.
CIRTensor csi_to_cir(const CSITensor& csi, Index n_taps);

// K x K DFT matrix, entry (t, k) = exp(-j 2 pi (k t mod K) / K).
const MatrixXcd& dft_matrix(Index size);

// Two-channel real encoder input of logical shape [2, n_pairs, n_bins].
// Row 0 holds real parts and row 1 imaginary parts; column = pair * n_bins + bin.
struct ModelInput {
    Index n_pairs = 0;
    Index n_bins = 0;
    Eigen::MatrixXd data;  // 2 x (n_pairs * n_bins)

    double at(Index channel, Index pair, Index bin) const {
        return data(channel, pair * n_bins + bin);
    }
};

// Shapes a CIR or CSI tensor; bins beyond the tensor's own length are zero.
ModelInput shape_input(const PairTensor& tensor, Index n_bins);

// Inverse of shape_input on the unpadded region.
PairTensor unshape_input(const ModelInput& input, Index n_rx, Index n_tx, Index n_bins);

// Global min/max of the raw values, then mean/std of the min-max-scaled values
// (population statistics).
struct NormStats {
    double min = 0.0;
    double max = 1.0;
    double mean = 0.0;  // of (x - min) / (max - min)
    double std = 1.0;   // of (x - min) / (max - min)

    void validate() const;
    bool operator==(const NormStats&) const = default;
};

NormStats fit_norm_stats(std::span<const ModelInput> training);

// y = ((x - min) / (max - min) - mean) / std, no clipping.
ModelInput normalize(const ModelInput& x, const NormStats& stats);
double normalize_value(double x, const NormStats& stats);

}  // namespace csiclip
