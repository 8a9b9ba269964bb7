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

#include "csiclip/types.hpp"

namespace csiclip {

// Named learnable tensor with its gradient accumulator.
template <typename Scalar>
struct Parameter {
    std::string name;
    Mat<Scalar> value;
    Mat<Scalar> grad;
    bool decay = true;  // subject to decoupled weight decay

    Parameter() = default;
    Parameter(std::string n, Mat<Scalar> v, bool d)
        : name(std::move(n)), value(std::move(v)), grad(Mat<Scalar>::Zero(value.rows(), value.cols())), decay(d) {}
};

template <typename Scalar>
using ParamRefs = std::vector<Parameter<Scalar>*>;

template <typename Scalar>
void zero_grad(const ParamRefs<Scalar>& params) {
    for (auto* p : params) p->grad.setZero();
}

// Batch of images in channels-last layout: row = (n * height + y) * width + x,
// one column per channel.
template <typename Scalar>
struct InputBatch {
    Index n = 0;
    Index height = 0;
    Index width = 0;
    Mat<Scalar> data;

    Index channels() const { return data.cols(); }
    Index pixels() const { return height * width; }
};

struct EncoderConfig {
    Index in_channels = 2;
    Index height = 32;  // antenna pairs
    Index width = 64;   // bins
    std::vector<Index> widths{16, 32, 64};
    Index embed_dim = 128;

    void validate() const;
    bool operator==(const EncoderConfig&) const = default;
};

// S stages of (3x3 same-padded convolution + bias, SiLU, 2x2 average pooling),
// then global average pooling and a linear projection to embed_dim.
template <typename Scalar>
class ConvEncoder {
public:
    struct Stage {
        Index height = 0, width = 0;  // spatial size at the stage input
        Mat<Scalar> cols;             // im2col, (n*h*w) x (cin*9)
        Mat<Scalar> pre;              // conv output before activation
        Mat<Scalar> sigmoid;          // sigmoid(pre)
    };
    struct Cache {
        Index n = 0;
        std::vector<Stage> stages;
        Mat<Scalar> pooled;  // n x C_last after global averaging
    };

    ConvEncoder() = default;
    ConvEncoder(const EncoderConfig& config, std::uint64_t seed);

    const EncoderConfig& config() const { return config_; }

    // Embeddings, one row per sample (n x embed_dim).
    Mat<Scalar> forward(const InputBatch<Scalar>& batch, Cache* cache = nullptr) const;

    // Accumulates parameter gradients for upstream gradient d_embed (n x embed_dim).
    void backward(const Cache& cache, const Mat<Scalar>& d_embed);

    std::vector<Parameter<Scalar>>& parameters() { return params_; }
    const std::vector<Parameter<Scalar>>& parameters() const { return params_; }
    ParamRefs<Scalar> refs();

private:
    EncoderConfig config_;
    std::vector<Parameter<Scalar>> params_;  // per stage: weight, bias; then proj weight, bias
};

// Two fully connected layers: D -> hidden (SiLU) -> outputs.
template <typename Scalar>
class TaskHead {
public:
    struct Cache {
        Mat<Scalar> input;
        Mat<Scalar> pre;
        Mat<Scalar> sigmoid;
    };

    TaskHead() = default;
    TaskHead(Index in_dim, Index hidden_dim, Index out_dim, std::uint64_t seed);

    Mat<Scalar> forward(const Mat<Scalar>& x, Cache* cache = nullptr) const;
    // Returns the gradient with respect to the head input.
    Mat<Scalar> backward(const Cache& cache, const Mat<Scalar>& d_out);

    Index out_dim() const { return params_[2].value.rows(); }
    std::vector<Parameter<Scalar>>& parameters() { return params_; }
    const std::vector<Parameter<Scalar>>& parameters() const { return params_; }
    ParamRefs<Scalar> refs();

private:
    std::vector<Parameter<Scalar>> params_;  // fc1.weight, fc1.bias, fc2.weight, fc2.bias
};

// Copies parameter values across scalar types, matching by position.
template <typename To, typename From>
void copy_values(std::vector<Parameter<To>>& dst, const std::vector<Parameter<From>>& src) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i].value = src[i].value.template cast<To>();
}

extern template class ConvEncoder<float>;
extern template class ConvEncoder<double>;
extern template class TaskHead<float>;
extern template class TaskHead<double>;

}  // namespace csiclip
