#include <gtest/gtest.h>

#include <cmath>

#include "amore/adam.hpp"
#include "amore/autodiff.hpp"
#include "amore/error.hpp"
#include "test_support.hpp"

using namespace amore;
using amore::testing::check_gradients;
using amore::testing::LossBuilder;
using amore::testing::random_tensor;

namespace {

// Runs the finite-difference check at `points` random parameter draws.
void expect_fd_agreement(const LossBuilder& build, const std::vector<Shape>& shapes,
                         std::uint64_t seed, int points = 100, double lo = -1.0,
                         double hi = 1.0) {
    Rng rng(seed);
    for (int rep = 0; rep < points; ++rep) {
        std::vector<Tensor> params;
        for (const auto& s : shapes) params.push_back(random_tensor(rng, s, lo, hi));
        auto res = check_gradients(build, params);
        ASSERT_LT(res.rel_error, 1e-6) << "draw " << rep;
    }
}

// Reduces any tensor to a scalar with a fixed non-uniform weighting so that
// every output element contributes a distinct gradient.
ad::Var probe(ad::Var v) {
    Tensor w(v.shape());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = 0.3 + 0.17 * double(i % 7);
    Tensor zero(v.shape());
    return ad::weighted_squared_error(v, zero, w);
}

}  // namespace

TEST(Grad, QuadraticSum) {
    ad::Tape tape;
    auto x = tape.leaf(Tensor::from({3}, {1, 2, 3}));
    auto g = tape.grad(ad::sum(ad::mul(x, x)), std::vector<ad::Var>{x});
    EXPECT_DOUBLE_EQ(g[0][0], 2.0);
    EXPECT_DOUBLE_EQ(g[0][1], 4.0);
    EXPECT_DOUBLE_EQ(g[0][2], 6.0);
}

TEST(Grad, TanhZeroAnnihilates) {
    ad::Tape tape;
    auto w = tape.leaf(Tensor::from({1}, {2.5}));
    auto t = ad::tanh(tape.constant(Tensor({1}, 0.0)));
    auto g = tape.grad(ad::sum(ad::mul(t, w)), std::vector<ad::Var>{w});
    EXPECT_EQ(g[0][0], 0.0);
}

TEST(Grad, NonScalarLossIsContractViolation) {
    ad::Tape tape;
    auto x = tape.leaf(Tensor({2}, 1.0));
    EXPECT_THROW(tape.grad(x, std::vector<ad::Var>{x}), ContractViolation);
}

TEST(Grad, UnreachedParameterGetsZeros) {
    ad::Tape tape;
    auto x = tape.leaf(Tensor({2}, 1.0));
    auto y = tape.leaf(Tensor({2, 2}, 1.0));
    auto g = tape.grad(ad::sum(x), std::vector<ad::Var>{x, y});
    ASSERT_EQ(g[1].shape(), (Shape{2, 2}));
    for (double v : g[1].data()) EXPECT_EQ(v, 0.0);
}

TEST(Grad, RandomThreeLayerComposite) {
    LossBuilder build = [](const std::vector<ad::Var>& p) {
        ad::Tape& tape = *p[0].tape;
        Rng rng(99);
        auto x = tape.constant(random_tensor(rng, {5, 3}));
        auto h = ad::tanh(ad::add_bias(ad::matmul(x, p[0]), p[1]));
        h = ad::sin(ad::add_bias(ad::matmul(h, p[2]), p[3]));
        auto out = ad::add_bias(ad::matmul(h, p[4]), p[5]);
        return ad::mean(ad::mul(out, out));
    };
    expect_fd_agreement(build, {{3, 4}, {4}, {4, 4}, {4}, {4, 2}, {2}}, 1);
}

TEST(Grad, ElementwiseOpsMatchFiniteDifferences) {
    const Shape s{2, 3};
    expect_fd_agreement([](const auto& p) { return probe(ad::add(p[0], p[1])); }, {s, s}, 2);
    expect_fd_agreement([](const auto& p) { return probe(ad::sub(p[0], p[1])); }, {s, s}, 3);
    expect_fd_agreement([](const auto& p) { return probe(ad::mul(p[0], p[1])); }, {s, s}, 4);
    expect_fd_agreement([](const auto& p) { return probe(ad::scale(p[0], -1.7)); }, {s}, 5);
    expect_fd_agreement([](const auto& p) { return probe(ad::add_scalar(p[0], 0.4)); }, {s}, 6);
    expect_fd_agreement([](const auto& p) { return probe(ad::tanh(p[0])); }, {s}, 7);
    expect_fd_agreement([](const auto& p) { return probe(ad::sin(p[0])); }, {s}, 8);
    expect_fd_agreement([](const auto& p) { return probe(ad::exp(p[0])); }, {s}, 9);
    expect_fd_agreement(
        [](const auto& p) { return probe(ad::affine_last_axis(p[0], {2.0, -1.0, 0.5}, {0.1, 0.0, -3.0})); },
        {s}, 10);
}

TEST(Grad, StructuralOpsMatchFiniteDifferences) {
    expect_fd_agreement([](const auto& p) { return probe(ad::add_bias(p[0], p[1])); },
                        {{4, 3}, {3}}, 11);
    expect_fd_agreement([](const auto& p) { return probe(ad::matmul(p[0], p[1])); },
                        {{3, 4}, {4, 2}}, 12);
    expect_fd_agreement([](const auto& p) { return probe(ad::reshape(p[0], {3, 2})); },
                        {{2, 3}}, 13);
    expect_fd_agreement([](const auto& p) { return probe(ad::take(p[0], 1, {2, 0, 2})); },
                        {{2, 3, 2}}, 14);
    expect_fd_agreement([](const auto& p) { return probe(ad::take(p[0], 2, {1, 1})); },
                        {{2, 2, 3}}, 15);
    expect_fd_agreement(
        [](const auto& p) { return probe(ad::stack_last_axis({p[0], p[1], p[0]})); },
        {{2, 3}, {2, 3}}, 16);
    expect_fd_agreement([](const auto& p) { return probe(ad::swap_last_axes(p[0])); },
                        {{2, 3, 4}}, 17);
    expect_fd_agreement([](const auto& p) { return probe(ad::sum_last_axis(p[0])); },
                        {{2, 3, 4}}, 18);
    expect_fd_agreement([](const auto& p) { return probe(ad::sum(p[0])); }, {{2, 3}}, 19);
    expect_fd_agreement([](const auto& p) { return probe(ad::mean(p[0])); }, {{2, 3}}, 20);
    expect_fd_agreement([](const auto& p) { return probe(ad::softmax_last_axis(p[0])); },
                        {{2, 5}}, 21, 100, -3.0, 3.0);
}

TEST(Grad, ContractionsMatchFiniteDifferences) {
    expect_fd_agreement([](const auto& p) { return probe(ad::contract_branch_trunk(p[0], p[1])); },
                        {{2, 3, 4}, {5, 3, 4}}, 22);
    expect_fd_agreement([](const auto& p) { return probe(ad::contract_trunk_A(p[0], p[1])); },
                        {{5, 3, 4}, {3, 4, 2}}, 23);
    expect_fd_agreement(
        [](const auto& p) { return probe(ad::contract_predict_2step(p[0], p[1])); },
        {{2, 3, 4}, {3, 5, 4}}, 24);
}

TEST(Grad, WeightedSquaredErrorMatchesFiniteDifferences) {
    Rng rng(25);
    Tensor target = random_tensor(rng, {3, 4});
    Tensor weights = random_tensor(rng, {3, 4}, 0.0, 2.0);
    expect_fd_agreement(
        [&](const auto& p) { return ad::weighted_squared_error(p[0], target, weights); },
        {{3, 4}}, 26);
}

TEST(Grad, SoftmaxSumHasZeroGradient) {
    Rng rng(31);
    for (int rep = 0; rep < 100; ++rep) {
        ad::Tape tape;
        auto x = tape.leaf(random_tensor(rng, {3, 6}, -20.0, 20.0));
        auto g = tape.grad(ad::sum(ad::softmax_last_axis(x)), std::vector<ad::Var>{x});
        for (double v : g[0].data()) ASSERT_LT(std::abs(v), 1e-10);
    }
}

TEST(Adam, ZeroGradientLeavesParameters) {
    std::vector<Tensor> params{Tensor::from({2}, {1.0, -2.0})};
    ad::Adam opt({}, params);
    opt.step(params, {Tensor({2})}, 0.1);
    EXPECT_EQ(params[0][0], 1.0);
    EXPECT_EQ(params[0][1], -2.0);
}

TEST(Adam, FirstStepHasLearningRateMagnitude) {
    std::vector<Tensor> params{Tensor({1}, 0.0)};
    ad::Adam opt({}, params);
    opt.step(params, {Tensor({1}, 1.0)}, 0.1);
    // m_hat = 1, v_hat = 1 after bias correction.
    EXPECT_NEAR(params[0][0], -0.1 / (1.0 + 1e-8), 1e-15);
    EXPECT_EQ(opt.steps(), 1);
}

TEST(Adam, OppositeGradientsShrinkSecondStep) {
    std::vector<Tensor> params{Tensor({1}, 0.0)};
    ad::Adam opt({}, params);
    opt.step(params, {Tensor({1}, 1.0)}, 0.1);
    const double step1 = params[0][0];
    opt.step(params, {Tensor({1}, -1.0)}, 0.1);
    const double step2 = params[0][0] - step1;
    // Hand evaluation: m2 = -0.01, v2 = 0.001999; m_hat = -0.01/0.19, v_hat = 1.
    const double expected = 0.1 * (0.01 / 0.19) / (1.0 + 1e-8);
    EXPECT_NEAR(step2, expected, 1e-12);
    EXPECT_LT(std::abs(step2), std::abs(step1));
}

TEST(Adam, ShapeMismatchThrows) {
    std::vector<Tensor> params{Tensor({2})};
    ad::Adam opt({}, params);
    EXPECT_THROW(opt.step(params, {Tensor({3})}, 0.1), DimensionError);
    EXPECT_THROW(opt.step(params, {}, 0.1), DimensionError);
}

TEST(Adam, LearningRateSchedule) {
    ad::LearningRateSchedule s{1e-3, 2000.0};
    EXPECT_DOUBLE_EQ(s.at(0), 1e-3);
    EXPECT_DOUBLE_EQ(s.at(2000), 5e-4);
    EXPECT_NEAR(s.at(1000), 1e-3 / std::sqrt(2.0), 1e-18);
    EXPECT_DOUBLE_EQ((ad::LearningRateSchedule{2e-3, 0.0}.at(5000)), 2e-3);
}

TEST(Determinism, RepeatedTrainingStepIsBitIdentical) {
    auto run = [] {
        Rng rng = Rng::stream(1234, "init");
        std::vector<Tensor> params{random_tensor(rng, {3, 4}), random_tensor(rng, {4, 1})};
        Tensor x = random_tensor(rng, {6, 3});
        ad::Adam opt({}, params);
        for (int it = 0; it < 5; ++it) {
            ad::Tape tape;
            auto w1 = tape.leaf(params[0]);
            auto w2 = tape.leaf(params[1]);
            auto out = ad::matmul(ad::tanh(ad::matmul(tape.constant(x), w1)), w2);
            auto g = tape.grad(ad::mean(ad::mul(out, out)), std::vector<ad::Var>{w1, w2});
            opt.step(params, g, 1e-2);
        }
        return params;
    };
    auto a = run();
    auto b = run();
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].buffer(), b[i].buffer());
}
