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

#include "csiclip/layers.hpp"

#include <cmath>
#include <random>

namespace csiclip {

namespace {

template <typename Scalar>
Mat<Scalar> uniform_init(std::mt19937_64& rng, Index rows, Index cols, double bound) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    Mat<Scalar> m(rows, cols);
    // Row-major fill so that the draw order is independent of storage order.
    for (Index r = 0; r < rows; ++r) {
        for (Index c = 0; c < cols; ++c) m(r, c) = static_cast<Scalar>(dist(rng));
    }
    return m;
}

template <typename Scalar>
Mat<Scalar> sigmoid(const Mat<Scalar>& x) {
    return ((-x.array()).exp() + Scalar(1)).inverse().matrix();
}

// d/dx [x * sigmoid(x)] = s * (1 + x * (1 - s)).
template <typename Scalar>
Mat<Scalar> silu_grad(const Mat<Scalar>& pre, const Mat<Scalar>& sig, const Mat<Scalar>& d_out) {
    return (d_out.array() * sig.array() * (Scalar(1) + pre.array() * (Scalar(1) - sig.array()))).matrix();
}

template <typename Scalar>
Mat<Scalar> im2col(const Mat<Scalar>& x, Index n, Index h, Index w) {
    const Index cin = x.cols();
    const Index hw = h * w;
    Mat<Scalar> cols = Mat<Scalar>::Zero(n * hw, cin * 9);
    for (Index ci = 0; ci < cin; ++ci) {
        for (Index ky = 0; ky < 3; ++ky) {
            for (Index kx = 0; kx < 3; ++kx) {
                const Index dy = ky - 1, dx = kx - 1;
                const Index x0 = std::max<Index>(0, -dx);
                const Index x1 = std::min<Index>(w, w - dx);
                auto dst = cols.col(ci * 9 + ky * 3 + kx);
                for (Index s = 0; s < n; ++s) {
                    for (Index y = 0; y < h; ++y) {
                        const Index ys = y + dy;
                        if (ys < 0 || ys >= h || x1 <= x0) continue;
                        dst.segment(s * hw + y * w + x0, x1 - x0) =
                            x.col(ci).segment(s * hw + ys * w + x0 + dx, x1 - x0);
                    }
                }
            }
        }
    }
    return cols;
}

template <typename Scalar>
Mat<Scalar> col2im(const Mat<Scalar>& cols, Index n, Index h, Index w) {
    const Index cin = cols.cols() / 9;
    const Index hw = h * w;
    Mat<Scalar> x = Mat<Scalar>::Zero(n * hw, cin);
    for (Index ci = 0; ci < cin; ++ci) {
        for (Index ky = 0; ky < 3; ++ky) {
            for (Index kx = 0; kx < 3; ++kx) {
                const Index dy = ky - 1, dx = kx - 1;
                const Index x0 = std::max<Index>(0, -dx);
                const Index x1 = std::min<Index>(w, w - dx);
                auto src = cols.col(ci * 9 + ky * 3 + kx);
                for (Index s = 0; s < n; ++s) {
                    for (Index y = 0; y < h; ++y) {
                        const Index ys = y + dy;
                        if (ys < 0 || ys >= h || x1 <= x0) continue;
                        x.col(ci).segment(s * hw + ys * w + x0 + dx, x1 - x0) +=
                            src.segment(s * hw + y * w + x0, x1 - x0);
                    }
                }
            }
        }
    }
    return x;
}

// 2x2 average pooling with floor semantics on odd sizes.
template <typename Scalar>
Mat<Scalar> avg_pool(const Mat<Scalar>& x, Index n, Index h, Index w) {
    const Index h2 = h / 2, w2 = w / 2;
    Mat<Scalar> out(n * h2 * w2, x.cols());
    for (Index c = 0; c < x.cols(); ++c) {
        for (Index s = 0; s < n; ++s) {
            for (Index y = 0; y < h2; ++y) {
                const Index r0 = s * h * w + 2 * y * w;
                for (Index xx = 0; xx < w2; ++xx) {
                    out(s * h2 * w2 + y * w2 + xx, c) =
                        Scalar(0.25) * (x(r0 + 2 * xx, c) + x(r0 + 2 * xx + 1, c) +
                                        x(r0 + w + 2 * xx, c) + x(r0 + w + 2 * xx + 1, c));
                }
            }
        }
    }
    return out;
}

template <typename Scalar>
Mat<Scalar> avg_pool_backward(const Mat<Scalar>& d_out, Index n, Index h, Index w) {
    const Index h2 = h / 2, w2 = w / 2;
    Mat<Scalar> dx = Mat<Scalar>::Zero(n * h * w, d_out.cols());
    for (Index c = 0; c < d_out.cols(); ++c) {
        for (Index s = 0; s < n; ++s) {
            for (Index y = 0; y < h2; ++y) {
                const Index r0 = s * h * w + 2 * y * w;
                for (Index xx = 0; xx < w2; ++xx) {
                    const Scalar g = Scalar(0.25) * d_out(s * h2 * w2 + y * w2 + xx, c);
                    dx(r0 + 2 * xx, c) = g;
                    dx(r0 + 2 * xx + 1, c) = g;
                    dx(r0 + w + 2 * xx, c) = g;
                    dx(r0 + w + 2 * xx + 1, c) = g;
                }
            }
        }
    }
    return dx;
}

}  // namespace

void EncoderConfig::validate() const {
    if (in_channels < 1 || embed_dim < 1 || widths.empty()) {
        throw ConfigError("encoder: in_channels, embed_dim and stage widths must be positive");
    }
    const Index min_side = Index(1) << widths.size();
    if (height < min_side || width < min_side) {
        throw ConfigError("encoder: input " + std::to_string(height) + "x" + std::to_string(width) +
                          " too small for " + std::to_string(widths.size()) + " pooling stages");
    }
    for (Index w : widths) {
        if (w < 1) throw ConfigError("encoder: stage widths must be positive");
    }
}

template <typename Scalar>
ConvEncoder<Scalar>::ConvEncoder(const EncoderConfig& config, std::uint64_t seed) : config_(config) {
    config_.validate();
    std::mt19937_64 rng(seed);
    Index cin = config_.in_channels;
    for (std::size_t s = 0; s < config_.widths.size(); ++s) {
        const Index cout = config_.widths[s];
        const std::string prefix = "stage" + std::to_string(s) + ".conv.";
        params_.emplace_back(prefix + "weight",
                             uniform_init<Scalar>(rng, cout, cin * 9, std::sqrt(6.0 / double(cin * 9))), true);
        params_.emplace_back(prefix + "bias", Mat<Scalar>::Zero(cout, 1), false);
        cin = cout;
    }
    params_.emplace_back("proj.weight",
                         uniform_init<Scalar>(rng, config_.embed_dim, cin, std::sqrt(3.0 / double(cin))), true);
    params_.emplace_back("proj.bias", Mat<Scalar>::Zero(config_.embed_dim, 1), false);
}

template <typename Scalar>
ParamRefs<Scalar> ConvEncoder<Scalar>::refs() {
    ParamRefs<Scalar> r;
    for (auto& p : params_) r.push_back(&p);
    return r;
}

template <typename Scalar>
Mat<Scalar> ConvEncoder<Scalar>::forward(const InputBatch<Scalar>& batch, Cache* cache) const {
    if (batch.channels() != config_.in_channels || batch.height != config_.height ||
        batch.width != config_.width || batch.data.rows() != batch.n * batch.pixels()) {
        throw ContractError("encoder_forward: batch shape [" + std::to_string(batch.n) + ", " +
                            std::to_string(batch.channels()) + ", " + std::to_string(batch.height) + ", " +
                            std::to_string(batch.width) + "] does not match the configured input");
    }
    const Index n = batch.n;
    const std::size_t n_stages = config_.widths.size();
    if (cache) {
        cache->n = n;
        cache->stages.assign(n_stages, {});
    }
    Mat<Scalar> x = batch.data;
    Index h = batch.height, w = batch.width;
    for (std::size_t s = 0; s < n_stages; ++s) {
        const Mat<Scalar>& weight = params_[2 * s].value;
        const Mat<Scalar>& bias = params_[2 * s + 1].value;
        Mat<Scalar> cols = im2col(x, n, h, w);
        Mat<Scalar> pre = cols * weight.transpose();
        pre.rowwise() += bias.transpose().row(0);
        Mat<Scalar> sig = sigmoid(pre);
        const Mat<Scalar> act = (pre.array() * sig.array()).matrix();
        x = avg_pool(act, n, h, w);
        if (cache) {
            Stage& st = cache->stages[s];
            st.height = h;
            st.width = w;
            st.cols = std::move(cols);
            st.pre = std::move(pre);
            st.sigmoid = std::move(sig);
        }
        h /= 2;
        w /= 2;
    }
    const Index hw = h * w;
    Mat<Scalar> pooled(n, x.cols());
    for (Index s = 0; s < n; ++s) pooled.row(s) = x.middleRows(s * hw, hw).colwise().mean();
    const auto& proj_w = params_[2 * n_stages].value;
    const auto& proj_b = params_[2 * n_stages + 1].value;
    Mat<Scalar> z = pooled * proj_w.transpose();
    z.rowwise() += proj_b.transpose().row(0);
    if (cache) cache->pooled = std::move(pooled);
    return z;
}

template <typename Scalar>
void ConvEncoder<Scalar>::backward(const Cache& cache, const Mat<Scalar>& d_embed) {
    const Index n = cache.n;
    const std::size_t n_stages = config_.widths.size();
    auto& proj_w = params_[2 * n_stages];
    auto& proj_b = params_[2 * n_stages + 1];
    proj_w.grad.noalias() += d_embed.transpose() * cache.pooled;
    proj_b.grad += d_embed.colwise().sum().transpose();
    const Mat<Scalar> d_pooled = d_embed * proj_w.value;

    const Stage& last = cache.stages.back();
    const Index h_out = last.height / 2, w_out = last.width / 2;
    const Index hw = h_out * w_out;
    Mat<Scalar> dx(n * hw, d_pooled.cols());
    for (Index s = 0; s < n; ++s) {
        dx.middleRows(s * hw, hw).rowwise() = d_pooled.row(s) / Scalar(hw);
    }
    for (std::size_t k = n_stages; k-- > 0;) {
        const Stage& st = cache.stages[k];
        auto& weight = params_[2 * k];
        auto& bias = params_[2 * k + 1];
        const Mat<Scalar> d_act = avg_pool_backward(dx, n, st.height, st.width);
        const Mat<Scalar> d_pre = silu_grad(st.pre, st.sigmoid, d_act);
        weight.grad.noalias() += d_pre.transpose() * st.cols;
        bias.grad += d_pre.colwise().sum().transpose();
        if (k > 0) {
            const Mat<Scalar> d_cols = d_pre * weight.value;
            dx = col2im(d_cols, n, st.height, st.width);
        }
    }
}

template <typename Scalar>
TaskHead<Scalar>::TaskHead(Index in_dim, Index hidden_dim, Index out_dim, std::uint64_t seed) {
    if (in_dim < 1 || hidden_dim < 1 || out_dim < 1) throw ConfigError("head: dimensions must be positive");
    std::mt19937_64 rng(seed);
    params_.emplace_back("fc1.weight", uniform_init<Scalar>(rng, hidden_dim, in_dim, std::sqrt(6.0 / double(in_dim))), true);
    params_.emplace_back("fc1.bias", Mat<Scalar>::Zero(hidden_dim, 1), false);
    params_.emplace_back("fc2.weight", uniform_init<Scalar>(rng, out_dim, hidden_dim, std::sqrt(3.0 / double(hidden_dim))), true);
    params_.emplace_back("fc2.bias", Mat<Scalar>::Zero(out_dim, 1), false);
}

template <typename Scalar>
ParamRefs<Scalar> TaskHead<Scalar>::refs() {
    ParamRefs<Scalar> r;
    for (auto& p : params_) r.push_back(&p);
    return r;
}

template <typename Scalar>
Mat<Scalar> TaskHead<Scalar>::forward(const Mat<Scalar>& x, Cache* cache) const {
    if (x.cols() != params_[0].value.cols()) throw ContractError("head: input width mismatch");
    Mat<Scalar> pre = x * params_[0].value.transpose();
    pre.rowwise() += params_[1].value.transpose().row(0);
    Mat<Scalar> sig = sigmoid(pre);
    Mat<Scalar> out = (pre.array() * sig.array()).matrix() * params_[2].value.transpose();
    out.rowwise() += params_[3].value.transpose().row(0);
    if (cache) {
        cache->input = x;
        cache->pre = std::move(pre);
        cache->sigmoid = std::move(sig);
    }
    return out;
}

template <typename Scalar>
Mat<Scalar> TaskHead<Scalar>::backward(const Cache& cache, const Mat<Scalar>& d_out) {
    const Mat<Scalar> hidden = (cache.pre.array() * cache.sigmoid.array()).matrix();
    params_[2].grad.noalias() += d_out.transpose() * hidden;
    params_[3].grad += d_out.colwise().sum().transpose();
    const Mat<Scalar> d_pre = silu_grad<Scalar>(cache.pre, cache.sigmoid, d_out * params_[2].value);
    params_[0].grad.noalias() += d_pre.transpose() * cache.input;
    params_[1].grad += d_pre.colwise().sum().transpose();
    return d_pre * params_[0].value;
}

template class ConvEncoder<float>;
template class ConvEncoder<double>;
template class TaskHead<float>;
template class TaskHead<double>;

}  // namespace csiclip
