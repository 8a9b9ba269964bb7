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

#include "csiclip/losses.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace csiclip {

namespace {

Eigen::VectorXd row_norms(const Eigen::MatrixXd& z, const char* which) {
    Eigen::VectorXd n = z.rowwise().norm();
    for (Index i = 0; i < n.size(); ++i) {
        if (!(n(i) > 0.0)) {
            throw ContractError(std::string("cosine similarity undefined: zero embedding in ") + which +
                                " row " + std::to_string(i));
        }
    }
    return n;
}

// Softmax cross-entropy of logits against the diagonal; returns the loss and
// writes dL/dlogits.
double diagonal_softmax_loss(const Eigen::MatrixXd& logits, Eigen::MatrixXd& d_logits) {
    const Index n = logits.rows();
    d_logits.resize(n, logits.cols());
    double loss = 0.0;
    for (Index i = 0; i < n; ++i) {
        const double m = logits.row(i).maxCoeff();
        const Eigen::RowVectorXd e = (logits.row(i).array() - m).exp().matrix();
        const double z = e.sum();
        loss += -(logits(i, i) - m - std::log(z));
        d_logits.row(i) = e / z;
        d_logits(i, i) -= 1.0;
    }
    d_logits /= static_cast<double>(n);
    return loss / static_cast<double>(n);
}

}  // namespace

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    if (a.size() != b.size()) throw ContractError("cosine_similarity: length mismatch");
    const double na = a.norm(), nb = b.norm();
    if (!(na > 0.0) || !(nb > 0.0)) throw ContractError("cosine similarity undefined for a zero vector");
    return a.dot(b) / (na * nb);
}

Eigen::MatrixXd cosine_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    const Eigen::VectorXd na = row_norms(a, "first");
    const Eigen::VectorXd nb = row_norms(b, "second");
    return (na.cwiseInverse().asDiagonal() * a) * (nb.cwiseInverse().asDiagonal() * b).transpose();
}

ContrastiveResult contrastive_loss(const Eigen::MatrixXd& z_csi, const Eigen::MatrixXd& z_cir,
                                   double temperature, bool symmetric) {
    if (!(temperature > 0.0)) throw ContractError("contrastive_loss: temperature must be positive");
    if (z_csi.rows() != z_cir.rows() || z_csi.cols() != z_cir.cols() || z_csi.rows() < 1) {
        throw ContractError("contrastive_loss: embedding batches must have equal, nonzero shape");
    }
    const Eigen::VectorXd n_csi = row_norms(z_csi, "CSI batch");
    const Eigen::VectorXd n_cir = row_norms(z_cir, "CIR batch");
    const Eigen::MatrixXd u_csi = n_csi.cwiseInverse().asDiagonal() * z_csi;
    const Eigen::MatrixXd u_cir = n_cir.cwiseInverse().asDiagonal() * z_cir;

    ContrastiveResult r;
    r.similarity = u_csi * u_cir.transpose();
    const Eigen::MatrixXd logits = r.similarity / temperature;

    Eigen::MatrixXd d_logits;
    r.loss = diagonal_softmax_loss(logits, d_logits);
    if (symmetric) {
        Eigen::MatrixXd d_logits_t;
        r.loss = 0.5 * (r.loss + diagonal_softmax_loss(logits.transpose(), d_logits_t));
        d_logits = 0.5 * (d_logits + d_logits_t.transpose());
    }

    // logits = S / tau, tau = exp(log_tau): dlogits/dlog_tau = -logits.
    r.grad_log_temperature = -(d_logits.array() * logits.array()).sum();
    const Eigen::MatrixXd d_sim = d_logits / temperature;
    const Eigen::MatrixXd d_u_csi = d_sim * u_cir;
    const Eigen::MatrixXd d_u_cir = d_sim.transpose() * u_csi;
    // Through u = z/|z|: dz = (du - u (u.du)) / |z|.
    auto through_norm = [](const Eigen::MatrixXd& u, const Eigen::MatrixXd& du, const Eigen::VectorXd& norms) {
        const Eigen::VectorXd proj = (u.array() * du.array()).rowwise().sum();
        return Eigen::MatrixXd(norms.cwiseInverse().asDiagonal() * (du - proj.asDiagonal() * u));
    };
    r.grad_csi = through_norm(u_csi, d_u_csi, n_csi);
    r.grad_cir = through_norm(u_cir, d_u_cir, n_cir);
    return r;
}

LossResult cross_entropy_loss(const Eigen::MatrixXd& logits, std::span<const Index> labels) {
    const Index n = logits.rows(), c = logits.cols();
    if (static_cast<Index>(labels.size()) != n || n < 1) {
        throw ContractError("cross_entropy_loss: label count does not match the batch");
    }
    LossResult r;
    r.grad.resize(n, c);
    for (Index i = 0; i < n; ++i) {
        const Index y = labels[static_cast<std::size_t>(i)];
        if (y < 0 || y >= c) {
            throw ContractError("cross_entropy_loss: label " + std::to_string(y) + " outside [0, " +
                                std::to_string(c) + ")");
        }
        const double m = logits.row(i).maxCoeff();
        const Eigen::RowVectorXd e = (logits.row(i).array() - m).exp().matrix();
        const double z = e.sum();
        r.loss += std::log(z) - (logits(i, y) - m);
        r.grad.row(i) = e / z;
        r.grad(i, y) -= 1.0;
    }
    r.loss /= static_cast<double>(n);
    r.grad /= static_cast<double>(n);
    return r;
}

LossResult mse_loss(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth) {
    if (pred.rows() != truth.rows() || pred.cols() != truth.cols() || pred.rows() < 1) {
        throw ContractError("mse_loss: prediction and truth shapes differ");
    }
    const double n = static_cast<double>(pred.rows());
    const Eigen::MatrixXd diff = pred - truth;
    return {diff.squaredNorm() / n, 2.0 * diff / n};
}

std::vector<Index> argmax_rows(const Eigen::MatrixXd& m) {
    std::vector<Index> out(static_cast<std::size_t>(m.rows()), 0);
    for (Index i = 0; i < m.rows(); ++i) {
        Index best = 0;
        for (Index j = 1; j < m.cols(); ++j) {
            if (m(i, j) > m(i, best)) best = j;
        }
        out[static_cast<std::size_t>(i)] = best;
    }
    return out;
}

}  // namespace csiclip
