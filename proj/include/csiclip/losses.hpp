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
#include <vector>

#include "csiclip/types.hpp"

namespace csiclip {

// a.b / (|a| |b|); throws ContractError when either vector is zero.
double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

// Row-wise cosine similarity matrix S(i, j) = cos(a_i, b_j).
Eigen::MatrixXd cosine_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

struct ContrastiveResult {
    double loss = 0.0;
    Eigen::MatrixXd grad_csi;  // dL/dZ_csi, same shape as Z_csi
    Eigen::MatrixXd grad_cir;  // dL/dZ_cir
    double grad_log_temperature = 0.0;
    Eigen::MatrixXd similarity;  // cosine matrix, CSI rows vs CIR columns
};

// L = -(1/N) sum_i log softmax_j(cos(zc_i, zr_j) / tau)[i], CSI rows as anchors
// and CIR rows as candidates. With symmetric = true the loss is averaged with
// the CIR-anchored direction. The temperature gradient is taken with respect
// to log(tau).
ContrastiveResult contrastive_loss(const Eigen::MatrixXd& z_csi, const Eigen::MatrixXd& z_cir,
                                   double temperature, bool symmetric = false);

struct LossResult {
    double loss = 0.0;
    Eigen::MatrixXd grad;
};

// Mean over rows of -log softmax(logits_i)[label_i].
LossResult cross_entropy_loss(const Eigen::MatrixXd& logits, std::span<const Index> labels);

// (1/N) sum_i |pred_i - truth_i|^2.
LossResult mse_loss(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth);

// Row-wise argmax, ties to the lowest index.
std::vector<Index> argmax_rows(const Eigen::MatrixXd& m);

}  // namespace csiclip
