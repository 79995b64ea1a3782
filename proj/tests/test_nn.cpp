#include <cmath>

#include "confed/nn.hpp"
#include "doctest.h"

using namespace confed;
using namespace confed::nn;

namespace {

Matrix row_matrix(std::vector<double> v) {
    Matrix m(1, v.size());
    m.data = std::move(v);
    return m;
}

Matrix random_matrix(size_t rows, size_t cols, Rng& rng, double scale = 1.0) {
    Matrix m(rows, cols);
    for (double& v : m.data) v = rng.normal() * scale;
    return m;
}

Matrix random_binary(size_t rows, size_t cols, Rng& rng) {
    Matrix m(rows, cols);
    for (double& v : m.data) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
    return m;
}

// Loss of the implemented forward pass; differentiating this numerically is
// the oracle that backward() must match.
double loss_value(const ModelParams& p, const Batch& b, LossKind kind, Mode mode,
                  uint64_t seed) {
    Matrix out = forward(p, b, mode, seed);
    switch (kind) {
        case LossKind::kBce:
            return bce_loss(out.data, b.targets.data);
        case LossKind::kL1:
            return l1_loss(out.data, b.targets.data);
        case LossKind::kSquare: {
            double total = 0.0;
            for (size_t i = 0; i < out.data.size(); ++i) {
                double d = out.data[i] - b.targets.data[i];
                total += d * d;
            }
            return total / static_cast<double>(out.data.size());
        }
    }
    return 0.0;
}

// Central finite differences, step 1e-5.
std::vector<double> fd_gradient(const ModelParams& p, const Batch& b, LossKind kind,
                                Mode mode, uint64_t seed) {
    const double h = 1e-5;
    std::vector<double> g(p.values.size(), 0.0);
    ModelParams work = p;
    for (size_t i = 0; i < p.values.size(); ++i) {
        work.values[i] = p.values[i] + h;
        double up = loss_value(work, b, kind, mode, seed);
        work.values[i] = p.values[i] - h;
        double down = loss_value(work, b, kind, mode, seed);
        work.values[i] = p.values[i];
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

// running statistics are excluded from the gradient contract
std::vector<bool> running_stat_mask(const ArchSpec& arch) {
    ParamLayout layout = make_layout(arch);
    std::vector<bool> mask(layout.total, false);
    for (const LayerSlots& s : layout.layers) {
        if (!s.has_bn) continue;
        for (size_t j = 0; j < s.out; ++j) {
            mask[s.run_mean + j] = true;
            mask[s.run_var + j] = true;
        }
    }
    return mask;
}

double max_rel_err(const std::vector<double>& a, const std::vector<double>& b,
                   const std::vector<bool>& skip) {
    REQUIRE(a.size() == b.size());
    double worst = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        if (skip[i]) continue;
        double denom = std::max({1e-4, std::fabs(a[i]), std::fabs(b[i])});
        worst = std::max(worst, std::fabs(a[i] - b[i]) / denom);
    }
    return worst;
}

}  // namespace

TEST_CASE("bce_loss matches worked examples") {
    CHECK(bce_loss({0.5}, {1.0}) == doctest::Approx(0.6931471805599453).epsilon(1e-12));
    // prediction equals target after clamping
    CHECK(bce_loss({1.0 - 1e-7, 1e-7}, {1.0, 0.0}) ==
          doctest::Approx(1e-7).epsilon(1e-3));
    CHECK(bce_loss({0.9, 0.2}, {1.0, 0.0}) ==
          doctest::Approx(0.16425203348601803).epsilon(1e-12));
    CHECK_THROWS_AS(bce_loss({0.5, 0.5}, {1.0}), InvalidInput);
}

TEST_CASE("bce_loss stays finite at clamped extremes") {
    double l = bce_loss({1.0, 0.0}, {0.0, 1.0});
    CHECK(std::isfinite(l));
    CHECK(l > 10.0);  // -log(1e-7) ~ 16.1
}

TEST_CASE("l1_loss matches worked examples") {
    CHECK(l1_loss({3.0, -2.0}, {3.0, -2.0}) == 0.0);
    CHECK(l1_loss({1.0, 2.0}, {0.0, 4.0}) == doctest::Approx(1.5).epsilon(1e-15));
    CHECK_THROWS_AS(l1_loss({1.0}, {1.0, 2.0}), InvalidInput);

    Rng rng(7);
    std::vector<double> a(64), b(64);
    for (size_t i = 0; i < a.size(); ++i) {
        a[i] = rng.normal();
        b[i] = rng.normal();
    }
    double expect = 0.0;
    for (size_t i = 0; i < a.size(); ++i) expect += std::fabs(a[i] - b[i]);
    expect /= 64.0;
    CHECK(l1_loss(a, b) == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("lsgan_losses matches worked examples") {
    auto perfect = lsgan_losses({1.0, 1.0}, {0.0, 0.0});
    CHECK(perfect.disc_loss == 0.0);
    CHECK(perfect.gen_loss == 1.0);

    auto mid = lsgan_losses({0.5}, {0.5});
    CHECK(mid.disc_loss == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(mid.gen_loss == doctest::Approx(0.25).epsilon(1e-15));

    Rng rng(11);
    std::vector<double> real(17), fake(9);
    for (double& v : real) v = rng.normal();
    for (double& v : fake) v = rng.normal();
    double dr = 0.0, df = 0.0, g = 0.0;
    for (double v : real) dr += (v - 1.0) * (v - 1.0);
    for (double v : fake) {
        df += v * v;
        g += (v - 1.0) * (v - 1.0);
    }
    auto got = lsgan_losses(real, fake);
    CHECK(got.disc_loss == doctest::Approx(dr / 17.0 + df / 9.0).epsilon(1e-14));
    CHECK(got.gen_loss == doctest::Approx(g / 9.0).epsilon(1e-14));
}

TEST_CASE("forward: all-zero parameters with sigmoid output give 0.5") {
    ArchSpec arch = make_arch({3, 4, 2});
    ModelParams p{arch, std::vector<double>(param_count(arch), 0.0)};
    Rng rng(5);
    Batch b{random_matrix(6, 3, rng), Matrix(6, 2)};
    Matrix out = forward(p, b, Mode::kEval);
    for (double v : out.data) CHECK(v == 0.5);
}

TEST_CASE("forward: train equals eval without dropout and batch norm") {
    ArchSpec arch = make_arch({4, 5, 3, 1});
    ModelParams p = init_params(arch, 42);
    Rng rng(13);
    Batch b{random_matrix(8, 4, rng), Matrix(8, 1)};
    Matrix train_out = forward(p, b, Mode::kTrain, 99);
    Matrix eval_out = forward(p, b, Mode::kEval);
    REQUIRE(train_out.data.size() == eval_out.data.size());
    for (size_t i = 0; i < train_out.data.size(); ++i)
        CHECK(train_out.data[i] == eval_out.data[i]);
}

TEST_CASE("forward: 1-2-1 hand-evaluated case") {
    ArchSpec arch = make_arch({1, 2, 1});
    ModelParams p{arch, {0.5, -0.25, 0.1, -0.2, 0.3, -0.4, 0.05}};
    Batch b{row_matrix({0.8}), row_matrix({0.0})};
    Matrix out = forward(p, b, Mode::kEval);
    // z1 = (0.5, -0.4); leaky -> (0.5, -0.004); z2 = 0.15+0.0016+0.05 = 0.2016
    CHECK(out.at(0, 0) == doctest::Approx(0.5502299921699273).epsilon(1e-15));
}

TEST_CASE("forward: dimension mismatch is rejected") {
    ArchSpec arch = make_arch({3, 2});
    ModelParams p = init_params(arch, 1);
    Rng rng(2);
    Batch b{random_matrix(4, 5, rng), Matrix(4, 2)};
    CHECK_THROWS_AS(forward(p, b, Mode::kEval), InvalidInput);
}

TEST_CASE("forward: sigmoid outputs strictly inside (0,1)") {
    Rng rng(31);
    for (int trial = 0; trial < 10; ++trial) {
        ArchSpec arch = make_arch({3, 6, 1});
        ModelParams p = init_params(arch, 100 + trial);
        Batch b{random_matrix(16, 3, rng, 3.0), Matrix(16, 1)};
        Matrix out = forward(p, b, Mode::kEval);
        for (double v : out.data) {
            CHECK(v > 0.0);
            CHECK(v < 1.0);
        }
    }
}

TEST_CASE("backward: l1 on a linear model with targets equal to outputs") {
    ArchSpec arch = make_arch({2, 1}, OutputActivation::kIdentity);
    ModelParams p{arch, {1.0, -2.0, 0.5}};
    Matrix in = row_matrix({3.0, 1.0});
    Matrix target = row_matrix({3.0 - 2.0 + 0.5});
    auto out = backward(p, Batch{in, target}, LossKind::kL1, Mode::kEval);
    CHECK(out.loss == 0.0);
    for (double g : out.param_grad) CHECK(g == 0.0);
}

TEST_CASE("backward: single sigmoid unit under BCE, zero weights, target 1") {
    ArchSpec arch = make_arch({1, 1});
    ModelParams p{arch, {0.0, 0.0}};
    auto out = backward(p, Batch{row_matrix({0.0}), row_matrix({1.0})}, LossKind::kBce,
                        Mode::kEval);
    // d/db of -log(sigmoid(b)) at b=0 is sigmoid(0)-1 = -0.5
    CHECK(out.param_grad[1] == doctest::Approx(-0.5).epsilon(1e-12));
}

TEST_CASE("backward matches central finite differences on random architectures") {
    Rng arch_rng(2024);
    const LossKind losses[] = {LossKind::kBce, LossKind::kL1, LossKind::kSquare};
    int checked = 0;
    for (int trial = 0; trial < 24; ++trial) {
        // depth 2..4, widths 1..5, random bn flags, dropout off
        size_t depth = 2 + arch_rng.uniform_index(3);
        std::vector<uint32_t> sizes;
        for (size_t l = 0; l < depth; ++l)
            sizes.push_back(1 + static_cast<uint32_t>(arch_rng.uniform_index(5)));
        ArchSpec arch;
        arch.layer_sizes = sizes;
        arch.output_activation =
            trial % 2 == 0 ? OutputActivation::kSigmoid : OutputActivation::kIdentity;
        arch.batch_norm.assign(arch.n_hidden(), 0);
        for (auto& f : arch.batch_norm) f = arch_rng.bernoulli(0.5) ? 1 : 0;
        arch.dropout_rate.assign(arch.n_hidden(), 0.0);

        ModelParams p = init_params(arch, 7000 + trial);
        Rng data_rng(900 + trial);
        size_t n_rows = 2 + data_rng.uniform_index(4);
        Matrix in = random_matrix(n_rows, sizes.front(), data_rng);
        LossKind kind = losses[trial % 3];
        Matrix target = kind == LossKind::kBce
                            ? random_binary(n_rows, sizes.back(), data_rng)
                            : random_matrix(n_rows, sizes.back(), data_rng);
        Batch b{in, target};
        Mode mode = trial % 5 == 0 ? Mode::kEval : Mode::kTrain;

        auto an = backward(p, b, kind, mode, 55);
        auto fd = fd_gradient(p, b, kind, mode, 55);
        double err = max_rel_err(an.param_grad, fd, running_stat_mask(arch));
        CHECK_MESSAGE(err < 1e-5, "trial ", trial, " err ", err);
        ++checked;
    }
    CHECK(checked >= 20);
}

TEST_CASE("backward: deterministic with identical seeds under dropout") {
    ArchSpec arch = make_arch({4, 6, 2}, OutputActivation::kSigmoid, true, 0.4);
    ModelParams p = init_params(arch, 77);
    Rng rng(3);
    Batch b{random_matrix(10, 4, rng), random_binary(10, 2, rng)};
    auto a1 = backward(p, b, LossKind::kBce, Mode::kTrain, 123);
    auto a2 = backward(p, b, LossKind::kBce, Mode::kTrain, 123);
    CHECK(a1.param_grad == a2.param_grad);
    CHECK(a1.loss == a2.loss);
    Matrix f1 = forward(p, b, Mode::kTrain, 123);
    Matrix f2 = forward(p, b, Mode::kTrain, 123);
    CHECK(f1.data == f2.data);
}

TEST_CASE("dropout in eval mode is the identity map") {
    ArchSpec with_drop = make_arch({3, 8, 1}, OutputActivation::kSigmoid, false, 0.7);
    ArchSpec no_drop = make_arch({3, 8, 1}, OutputActivation::kSigmoid, false, 0.0);
    ModelParams p1 = init_params(with_drop, 5);
    ModelParams p2{no_drop, p1.values};
    Rng rng(9);
    Batch b{random_matrix(5, 3, rng), Matrix(5, 1)};
    Matrix e1 = forward(p1, b, Mode::kEval, 1);
    Matrix e2 = forward(p2, b, Mode::kEval, 2);
    CHECK(e1.data == e2.data);
}

TEST_CASE("batch norm: train mode normalizes with batch statistics") {
    ArchSpec arch = make_arch({2, 3, 1}, OutputActivation::kIdentity, true);
    ModelParams p = init_params(arch, 21);
    Rng rng(17);
    Batch b{random_matrix(32, 2, rng, 2.0), Matrix(32, 1)};
    auto out = backward(p, b, LossKind::kSquare, Mode::kTrain, 0);
    REQUIRE(out.bn_stats.mean.size() == 1);
    REQUIRE(out.bn_stats.var.size() == 1);
    CHECK(out.bn_stats.mean[0].size() == 3);

    // running statistics move toward batch statistics with momentum 0.9
    ModelParams updated = p;
    apply_bn_update(updated, out.bn_stats);
    ParamLayout layout = make_layout(arch);
    const LayerSlots& s = layout.layers[0];
    for (size_t j = 0; j < 3; ++j) {
        double expect = 0.9 * 0.0 + 0.1 * out.bn_stats.mean[0][j];
        CHECK(updated.values[s.run_mean + j] == doctest::Approx(expect).epsilon(1e-15));
        double expect_var = 0.9 * 1.0 + 0.1 * out.bn_stats.var[0][j];
        CHECK(updated.values[s.run_var + j] ==
              doctest::Approx(expect_var).epsilon(1e-15));
    }
}

TEST_CASE("sgd_step: worked examples and length check") {
    ArchSpec arch = make_arch({1, 1}, OutputActivation::kIdentity);
    ModelParams p{arch, {1.0, 2.0}};
    ModelParams stepped = sgd_step(p, {0.5, 0.0}, 0.1);
    CHECK(stepped.values[0] == doctest::Approx(0.95).epsilon(1e-15));
    CHECK(stepped.values[1] == 2.0);

    ModelParams same = sgd_step(p, {0.0, 0.0}, 0.5);
    CHECK(same.values == p.values);

    CHECK_THROWS_AS(sgd_step(p, {1.0}, 0.1), InvalidInput);

    Rng rng(41);
    ArchSpec arch2 = make_arch({3, 4, 2});
    ModelParams p2 = init_params(arch2, 6);
    std::vector<double> g(p2.values.size());
    for (double& v : g) v = rng.normal();
    ModelParams s2 = sgd_step(p2, g, 0.03);
    for (size_t i = 0; i < g.size(); ++i)
        CHECK(s2.values[i] == doctest::Approx(p2.values[i] - 0.03 * g[i]).epsilon(1e-15));
}

TEST_CASE("serialize/deserialize is an exact inverse pair") {
    ArchSpec arch = make_arch({5, 7, 3, 2}, OutputActivation::kIdentity, true, 0.25);
    ModelParams p = init_params(arch, 123);
    auto bytes = serialize_params(p);
    ModelParams q = deserialize_params(bytes);
    CHECK(q == p);
}

TEST_CASE("deserialize rejects malformed input") {
    ArchSpec arch = make_arch({2, 2});
    ModelParams p = init_params(arch, 9);
    auto bytes = serialize_params(p);

    auto truncated = bytes;
    truncated.resize(bytes.size() - 5);
    CHECK_THROWS_AS(deserialize_params(truncated), ParseError);

    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(deserialize_params(bad_magic), ParseError);

    // corrupt the declared value count so header and payload disagree
    auto bad_count = bytes;
    size_t count_pos = bytes.size() - p.values.size() * 8 - 8;
    bad_count[count_pos] ^= 0xFF;
    CHECK_THROWS_AS(deserialize_params(bad_count), ParseError);

    CHECK_THROWS_AS(deserialize_params({}), ParseError);
}

TEST_CASE("init_params: weights within the fan-based limit, bn slots set") {
    ArchSpec arch = make_arch({10, 6, 1}, OutputActivation::kSigmoid, true);
    ModelParams p = init_params(arch, 4);
    ParamLayout layout = make_layout(arch);
    const LayerSlots& s = layout.layers[0];
    double limit = std::sqrt(6.0 / 16.0);
    for (size_t i = 0; i < s.in * s.out; ++i) {
        CHECK(std::fabs(p.values[s.w + i]) <= limit);
    }
    for (size_t j = 0; j < s.out; ++j) {
        CHECK(p.values[s.b + j] == 0.0);
        CHECK(p.values[s.gamma + j] == 1.0);
        CHECK(p.values[s.beta + j] == 0.0);
        CHECK(p.values[s.run_mean + j] == 0.0);
        CHECK(p.values[s.run_var + j] == 1.0);
    }
}
