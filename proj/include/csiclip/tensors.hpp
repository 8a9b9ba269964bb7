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

#include "csiclip/types.hpp"

namespace csiclip {

// Complex per-antenna-pair channel tensor of logical shape [n_rx, n_tx, n_bins].
// Stored as a (n_rx*n_tx) x n_bins matrix; pair index = rx * n_tx + tx.
struct PairTensor {
    Index n_rx = 0;
    Index n_tx = 0;
    MatrixXcd data;

    PairTensor() = default;
    PairTensor(Index rx, Index tx, Index bins)
        : n_rx(rx), n_tx(tx), data(MatrixXcd::Zero(rx * tx, bins)) {}

    Index n_pairs() const { return n_rx * n_tx; }
    Index n_bins() const { return data.cols(); }

    cd& operator()(Index rx, Index tx, Index bin) { return data(rx * n_tx + tx, bin); }
    cd operator()(Index rx, Index tx, Index bin) const { return data(rx * n_tx + tx, bin); }

    double energy() const { return data.squaredNorm(); }
    bool all_finite() const { return data.allFinite(); }
};

// Delay domain: bins are taps.
struct CIRTensor : PairTensor {
    using PairTensor::PairTensor;
    Index n_taps() const { return n_bins(); }
};

// Frequency domain: bins are subcarriers.
struct CSITensor : PairTensor {
    using PairTensor::PairTensor;
    Index n_subcarriers() const { return n_bins(); }
};

}  // namespace csiclip
