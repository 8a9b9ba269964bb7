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
#include <filesystem>
#include <random>

#include "csiclip/checkpoint.hpp"
#include "csiclip/gradcheck.hpp"
#include "csiclip/layers.hpp"
#include "csiclip/losses.hpp"
#include "csiclip/optim.hpp"

using namespace csiclip;

namespace {

Eigen::MatrixXd randn(std::mt19937_64& rng, Index r, Index c, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    Eigen::MatrixXd m(r, c);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
    return m;
}

template <typename Scalar>
InputBatch<Scalar> random_batch(std::mt19937_64& rng, Index n, Index c, Index h, Index w) {
    InputBatch<Scalar> b;
    b.n = n;
    b.height = h;
    b.width = w;
    b.data = randn(rng, n * h * w, c).cast<Scalar>();
    return b;
}

double silu(double x) { return x / (1.0 + std::exp(-x)); }

}  // namespace

TEST_CASE("encoder forward: shape, zero input, shape mismatch") {
    const EncoderConfig cfg{2, 32, 64, {16, 32, 64}, 128};
    const ConvEncoder<float> enc(cfg, 1);
    std::mt19937_64 rng(1);
    const auto z = enc.forward(random_batch<float>(rng, 4, 2, 32, 64));
    CHECK(z.rows() == 4);
    CHECK(z.cols() == 128);
    CHECK(z.allFinite());

    InputBatch<float> zero = random_batch<float>(rng, 3, 2, 32, 64);
    zero.data.setZero();
    CHECK(enc.forward(zero).cwiseAbs().maxCoeff() == 0.0f);

    CHECK_THROWS_AS(enc.forward(random_batch<float>(rng, 2, 2, 16, 64)), ContractError);
    CHECK_THROWS_AS(enc.forward(random_batch<float>(rng, 2, 1, 32, 64)), ContractError);
}

TEST_CASE("encoder forward: tiny config matches hand-unrolled arithmetic") {
    const EncoderConfig cfg{2, 4, 4, {2}, 3};
    ConvEncoder<double> enc(cfg, 7);
    std::mt19937_64 rng(2);
    enc.parameters()[1].value = randn(rng, 2, 1);  // nonzero conv bias
    enc.parameters()[3].value = randn(rng, 3, 1);
    const auto batch = random_batch<double>(rng, 2, 2, 4, 4);
    const Eigen::MatrixXd z = enc.forward(batch);

    const auto& W = enc.parameters()[0].value;  // [cout, cin * 9], column ci * 9 + ky * 3 + kx
    const auto& b = enc.parameters()[1].value;
    const auto& P = enc.parameters()[2].value;
    const auto& pb = enc.parameters()[3].value;
    auto in = [&](Index n, Index c, Index y, Index x) -> double {
        if (y < 0 || y >= 4 || x < 0 || x >= 4) return 0.0;
        return batch.data((n * 4 + y) * 4 + x, c);
    };
    for (Index n = 0; n < 2; ++n) {
        double pooled[2] = {0.0, 0.0};
        for (Index co = 0; co < 2; ++co) {
            double act[4][4];
            for (Index y = 0; y < 4; ++y) {
                for (Index x = 0; x < 4; ++x) {
                    double s = b(co, 0);
                    for (Index ci = 0; ci < 2; ++ci) {
                        for (Index ky = 0; ky < 3; ++ky) {
                            for (Index kx = 0; kx < 3; ++kx) {
                                s += W(co, ci * 9 + ky * 3 + kx) * in(n, ci, y + ky - 1, x + kx - 1);
                            }
                        }
                    }
                    act[y][x] = silu(s);
                }
            }
            // 2x2 average pooling to 2x2, then the global mean of those four cells.
            double total = 0.0;
            for (Index y = 0; y < 2; ++y) {
                for (Index x = 0; x < 2; ++x) {
                    total += 0.25 * (act[2 * y][2 * x] + act[2 * y][2 * x + 1] + act[2 * y + 1][2 * x] +
                                     act[2 * y + 1][2 * x + 1]);
                }
            }
            pooled[co] = total / 4.0;
        }
        for (Index d = 0; d < 3; ++d) {
            const double ref = pb(d, 0) + P(d, 0) * pooled[0] + P(d, 1) * pooled[1];
            CHECK(std::abs(z(n, d) - ref) < 1e-13);
        }
    }
}

TEST_CASE("encoder init is seed-determined") {
    const EncoderConfig cfg{2, 8, 8, {4, 4}, 6};
    const ConvEncoder<float> a(cfg, 3), b(cfg, 3), c(cfg, 4);
    for (std::size_t i = 0; i < a.parameters().size(); ++i) {
        CHECK(a.parameters()[i].value == b.parameters()[i].value);
        CHECK(a.parameters()[i].name == b.parameters()[i].name);
    }
    CHECK(a.parameters()[0].value != c.parameters()[0].value);
    CHECK(a.parameters()[1].value.cwiseAbs().maxCoeff() == 0.0f);
}

TEST_CASE("cosine similarity") {
    Eigen::VectorXd a(2), b(2);
    a << 1.0, 2.0;
    b << 2.0, 1.0;
    CHECK(cosine_similarity(a, a) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(cosine_similarity(a, b) == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(cosine_similarity(Eigen::VectorXd::Unit(3, 0), Eigen::VectorXd::Unit(3, 2)) == 0.0);
    CHECK_THROWS_AS(cosine_similarity(a, Eigen::VectorXd::Zero(2)), ContractError);
}

TEST_CASE("contrastive loss: N=1, orthonormal pair, random embeddings") {
    std::mt19937_64 rng(3);
    const Eigen::MatrixXd one = randn(rng, 1, 8);
    const ContrastiveResult r1 = contrastive_loss(one, randn(rng, 1, 8), 0.07);
    CHECK(r1.loss == 0.0);

    const Eigen::MatrixXd e = Eigen::MatrixXd::Identity(2, 2);
    CHECK(contrastive_loss(e, e, 1.0).loss == doctest::Approx(std::log(1.0 + std::exp(-1.0))).epsilon(1e-14));

    double mean = 0.0;
    const int trials = 20;
    for (int t = 0; t < trials; ++t) {
        mean += contrastive_loss(randn(rng, 64, 128), randn(rng, 64, 128), 1.0).loss / trials;
    }
    CHECK(std::abs(mean - std::log(64.0)) < 0.15);

    CHECK_THROWS_AS(contrastive_loss(e, e, 0.0), ContractError);
    CHECK_THROWS_AS(contrastive_loss(e, Eigen::MatrixXd::Identity(3, 3), 1.0), ContractError);
}

TEST_CASE("contrastive loss: scale and permutation invariance") {
    std::mt19937_64 rng(4);
    const Eigen::MatrixXd a = randn(rng, 8, 16), b = randn(rng, 8, 16);
    const double base = contrastive_loss(a, b, 0.1).loss;
    Eigen::MatrixXd as = a, bs = b;
    as.row(2) *= 7.5;
    bs.row(5) *= 0.01;
    CHECK(std::abs(contrastive_loss(as, bs, 0.1).loss - base) < 1e-12);

    Eigen::PermutationMatrix<Eigen::Dynamic> perm(8);
    perm.setIdentity();
    std::shuffle(perm.indices().data(), perm.indices().data() + 8, rng);
    CHECK(std::abs(contrastive_loss(perm * a, perm * b, 0.1).loss - base) < 1e-12);
    CHECK(contrastive_loss(a, b, 0.1).loss >= 0.0);
}

TEST_CASE("cross-entropy: saturation, symmetry, scalar oracle, shift invariance") {
    Eigen::MatrixXd sat(1, 2);
    sat << 20.0, -20.0;
    const std::vector<Index> zero{0};
    CHECK(cross_entropy_loss(sat, zero).loss < 1e-8);

    CHECK(cross_entropy_loss(Eigen::MatrixXd::Zero(1, 2), zero).loss == doctest::Approx(std::log(2.0)).epsilon(1e-15));

    Eigen::MatrixXd l(1, 3);
    l << 1.0, 2.0, 0.5;
    const std::vector<Index> one{1};
    const double ref = -std::log(std::exp(2.0) / (std::exp(1.0) + std::exp(2.0) + std::exp(0.5)));
    CHECK(std::abs(cross_entropy_loss(l, one).loss - ref) < 1e-14);

    std::mt19937_64 rng(5);
    const Eigen::MatrixXd logits = randn(rng, 6, 4, 3.0);
    const std::vector<Index> labels{0, 3, 1, 2, 2, 0};
    Eigen::MatrixXd shifted = logits;
    shifted.row(1).array() += 100.0;
    shifted.row(4).array() -= 37.0;
    CHECK(std::abs(cross_entropy_loss(shifted, labels).loss - cross_entropy_loss(logits, labels).loss) < 1e-12);

    const std::vector<Index> bad{0, 4, 1, 2, 2, 0};
    CHECK_THROWS_AS(cross_entropy_loss(logits, bad), ContractError);
}

TEST_CASE("mse: zero, 3-4-5, loop oracle") {
    std::mt19937_64 rng(6);
    const Eigen::MatrixXd p = randn(rng, 8, 2), t = randn(rng, 8, 2);
    CHECK(mse_loss(p, p).loss == 0.0);
    Eigen::MatrixXd a(1, 2), b(1, 2);
    a << 3.0, 4.0;
    b << 0.0, 0.0;
    CHECK(mse_loss(a, b).loss == 25.0);
    double ref = 0.0;
    for (Index i = 0; i < 8; ++i) {
        double s = 0.0;
        for (Index j = 0; j < 2; ++j) s += (p(i, j) - t(i, j)) * (p(i, j) - t(i, j));
        ref += s / 8.0;
    }
    CHECK(std::abs(mse_loss(p, t).loss - ref) < 1e-14);
    CHECK_THROWS_AS(mse_loss(p, randn(rng, 8, 3)), ContractError);
}

TEST_CASE("argmax ties go to the lowest index") {
    Eigen::MatrixXd m(3, 3);
    m << 1, 1, 0, 0, 2, 2, 5, 5, 5;
    const std::vector<Index> expect{0, 1, 0};
    CHECK(argmax_rows(m) == expect);
}

TEST_CASE("gradient check: linear loss agrees exactly") {
    std::mt19937_64 rng(7);
    const Eigen::MatrixXd x = randn(rng, 1, 5);
    Parameter<double> w("w", randn(rng, 1, 5), true);
    w.grad = x;
    const auto report = gradient_check([&] { return (w.value.array() * x.array()).sum(); }, {&w}, 1e-4);
    CHECK(report.passed());
    CHECK(report.max_rel_error() < 1e-9);
}

TEST_CASE("gradient check: losses in double over seeds") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        std::mt19937_64 rng(100 + seed);
        Parameter<double> zc("z_csi", randn(rng, 4, 6), false);
        Parameter<double> zr("z_cir", randn(rng, 4, 6), false);
        Parameter<double> lt("log_tau", Eigen::MatrixXd::Constant(1, 1, std::log(0.3)), false);
        for (bool symmetric : {false, true}) {
            const ContrastiveResult r = contrastive_loss(zc.value, zr.value, std::exp(lt.value(0, 0)), symmetric);
            zc.grad = r.grad_csi;
            zr.grad = r.grad_cir;
            lt.grad(0, 0) = r.grad_log_temperature;
            const auto rep = gradient_check(
                [&] { return contrastive_loss(zc.value, zr.value, std::exp(lt.value(0, 0)), symmetric).loss; },
                {&zc, &zr, &lt}, 1e-4);
            CHECK(rep.max_rel_error() < 1e-4);
        }

        Parameter<double> logits("logits", randn(rng, 5, 4), false);
        const std::vector<Index> labels{0, 3, 2, 2, 1};
        logits.grad = cross_entropy_loss(logits.value, labels).grad;
        CHECK(gradient_check([&] { return cross_entropy_loss(logits.value, labels).loss; }, {&logits}, 1e-4)
                  .max_rel_error() < 1e-4);

        Parameter<double> pred("pred", randn(rng, 5, 3), false);
        const Eigen::MatrixXd truth = randn(rng, 5, 3);
        pred.grad = mse_loss(pred.value, truth).grad;
        CHECK(gradient_check([&] { return mse_loss(pred.value, truth).loss; }, {&pred}, 1e-4).max_rel_error() < 1e-4);
    }
}

TEST_CASE("gradient check: encoder + head + MSE in double") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        std::mt19937_64 rng(200 + seed);
        ConvEncoder<double> enc(EncoderConfig{2, 4, 8, {3, 4}, 5}, seed);
        TaskHead<double> head(5, 6, 2, seed + 50);
        for (auto& p : enc.parameters()) {
            if (!p.decay) p.value = randn(rng, p.value.rows(), p.value.cols(), 0.1);
        }
        const auto batch = random_batch<double>(rng, 3, 2, 4, 8);
        const Eigen::MatrixXd truth = randn(rng, 3, 2);
        ParamRefs<double> params = enc.refs();
        for (auto* p : head.refs()) params.push_back(p);
        zero_grad(params);
        ConvEncoder<double>::Cache ec;
        TaskHead<double>::Cache hc;
        const LossResult l = mse_loss(head.forward(enc.forward(batch, &ec), &hc), truth);
        enc.backward(ec, head.backward(hc, l.grad));
        const auto rep =
            gradient_check([&] { return mse_loss(head.forward(enc.forward(batch)), truth).loss; }, params, 1e-4);
        for (const auto& e : rep.entries) {
            INFO(e.name << " rel " << e.max_rel_error);
            CHECK(e.passed);
        }
    }
}

TEST_CASE("AdamW: no-op, hand update, decoupled decay, divergence") {
    Parameter<double> p("p", Eigen::MatrixXd::Constant(1, 1, 1.0), true);
    AdamW<double> noop(AdamWConfig{0.1, 0.9, 0.999, 1e-8, 0.0});
    p.grad.setZero();
    noop.step({&p});
    CHECK(p.value(0, 0) == 1.0);
    CHECK(noop.step_count() == 1);

    AdamW<double> one(AdamWConfig{0.1, 0.9, 0.999, 1e-8, 0.0});
    p.grad(0, 0) = 1.0;
    one.step({&p});
    // m = 0.1, v = 0.001; bias-corrected both equal 1.
    CHECK(std::abs(p.value(0, 0) - (1.0 - 0.1 * 1.0 / (1.0 + 1e-8))) < 1e-15);

    Parameter<double> q("q", Eigen::MatrixXd::Constant(1, 1, 1.0), true);
    AdamW<double> decay(AdamWConfig{0.1, 0.9, 0.999, 1e-8, 0.01});
    decay.step({&q});
    CHECK(std::abs(q.value(0, 0) - (1.0 - 0.001)) < 1e-15);

    Parameter<double> bias("bias", Eigen::MatrixXd::Constant(1, 1, 1.0), false);
    decay.step({&q, &bias});
    CHECK(bias.value(0, 0) == 1.0);

    q.grad(0, 0) = std::nan("");
    const double before = q.value(0, 0);
    try {
        decay.step({&q});
        FAIL("expected a DivergenceError");
    } catch (const DivergenceError& e) {
        CHECK(std::string(e.what()).find("q") != std::string::npos);
    }
    CHECK(q.value(0, 0) == before);
}

TEST_CASE("plateau schedule") {
    PlateauSchedule dec;
    double lr = 1.0;
    for (int i = 0; i < 40; ++i) lr = dec.step(10.0 - i, lr);
    CHECK(lr == 1.0);

    PlateauSchedule flat;
    lr = 1.0;
    for (int i = 0; i < 10; ++i) lr = flat.step(3.0, lr);
    CHECK(lr == doctest::Approx(0.8).epsilon(1e-15));
    for (int i = 0; i < 10; ++i) lr = flat.step(3.0, lr);
    CHECK(lr == doctest::Approx(0.64).epsilon(1e-15));
}

TEST_CASE("early stopping") {
    std::vector<double> dec;
    for (int i = 0; i < 50; ++i) {
        dec.push_back(100.0 - i);
        CHECK_FALSE(early_stop_check(dec, 3));
    }
    CHECK(early_stop_check(std::vector<double>(4, 1.0), 3));
    CHECK_FALSE(early_stop_check(std::vector<double>(3, 1.0), 3));

    // Minimum at the second entry; with patience 3 the rule first fires once
    // the fifth entry (index 5 counting from one) is recorded.
    std::vector<double> h{5, 4, 6, 6, 6, 6, 6};
    std::size_t first_stop = 0;
    for (std::size_t n = 1; n <= h.size(); ++n) {
        if (early_stop_check(std::span<const double>(h.data(), n), 3)) {
            first_stop = n;
            break;
        }
    }
    CHECK(first_stop == 5);
}

TEST_CASE("checkpoint round trip and corruption") {
    const EncoderConfig cfg{2, 8, 8, {4}, 6};
    ConvEncoder<float> enc(cfg, 11);
    AdamW<float> opt;
    std::mt19937_64 rng(12);
    for (auto& p : enc.parameters()) p.grad = randn(rng, p.value.rows(), p.value.cols()).cast<float>();
    opt.step(enc.refs());

    Checkpoint ck;
    ck.kind = "test";
    ck.config_echo = "{\"a\": 1}";
    ck.epoch = 17;
    ck.rng_state = "1 2 3";
    ck.scalars["x"] = 0.1;
    ck.add_parameters("enc/", enc.parameters());
    ck.add_optimizer("opt/", opt);
    const std::vector<char> bytes = ck.serialize();
    CHECK(std::string(bytes.begin(), bytes.begin() + 8) == "CSICLIPK");

    const Checkpoint back = Checkpoint::deserialize(bytes);
    CHECK(back.kind == "test");
    CHECK(back.config_echo == ck.config_echo);
    CHECK(back.epoch == 17);
    CHECK(back.rng_state == "1 2 3");
    CHECK(back.scalar("x") == 0.1);
    ConvEncoder<float> other(cfg, 99);
    back.load_parameters("enc/", other.parameters());
    for (std::size_t i = 0; i < enc.parameters().size(); ++i) {
        CHECK(other.parameters()[i].value == enc.parameters()[i].value);
    }
    AdamW<float> opt2;
    back.load_optimizer("opt/", opt2);
    CHECK(opt2.step_count() == 1);
    CHECK(opt2.first_moments().size() == opt.first_moments().size());
    CHECK(opt2.second_moments()[0] == opt.second_moments()[0]);
    CHECK(back.serialize() == bytes);

    std::vector<char> bad = bytes;
    bad[bad.size() / 2] ^= 0x10;
    CHECK_THROWS_AS(Checkpoint::deserialize(bad), DataError);

    ConvEncoder<float> wrong(EncoderConfig{2, 8, 8, {5}, 6}, 1);
    CHECK_THROWS_AS(back.load_parameters("enc/", wrong.parameters()), DataError);

    const auto path = std::filesystem::temp_directory_path() / "csiclip_test.ckpt";
    ck.save(path);
    CHECK(Checkpoint::load(path).serialize() == bytes);
    std::filesystem::remove(path);
}
