#include <gtest/gtest.h>

#include <cmath>

#include "amore/error.hpp"
#include "amore/networks.hpp"
#include "test_support.hpp"

using namespace amore;
using amore::nn::jacobi_basis;
using amore::testing::check_gradients;
using amore::testing::random_tensor;

namespace {

double binom(double n, int k) {
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r *= (n - k + i) / i;
    return r;
}

// Explicit-sum representation of the Jacobi polynomial, independent of the
// three-term recurrence:
//   P_n(x) = sum_s C(n+a, n-s) C(n+b, s) ((x-1)/2)^s ((x+1)/2)^(n-s)
double jacobi_explicit(int n, double a, double b, double x) {
    double sum = 0.0;
    for (int s = 0; s <= n; ++s)
        sum += binom(n + a, n - s) * binom(n + b, s) * std::pow((x - 1) / 2, s) *
               std::pow((x + 1) / 2, n - s);
    return sum;
}

std::vector<ad::Var> as_leaves(ad::Tape& tape, const std::vector<Tensor>& ts) {
    std::vector<ad::Var> out;
    for (const auto& t : ts) out.push_back(tape.leaf(t));
    return out;
}

}  // namespace

TEST(Jacobi, BaseCaseIsOne) {
    Rng rng(1);
    Tensor x = random_tensor(rng, {7});
    Tensor p = jacobi_basis(x, 4, 1.0, 1.0);
    for (std::size_t i = 0; i < 7; ++i) EXPECT_EQ(p.at(i, 0), 1.0);
}

TEST(Jacobi, FirstOrderIsTwoX) {
    Tensor p = jacobi_basis(Tensor::from({1}, {0.5}), 1, 1.0, 1.0);
    EXPECT_DOUBLE_EQ(p.at(0, 1), 1.0);
}

TEST(Jacobi, SecondOrderAtEndpointsAndCentre) {
    // (15 x^2 - 3) / 4 for alpha = beta = 1.
    Tensor p = jacobi_basis(Tensor::from({3}, {-1.0, 0.0, 1.0}), 2, 1.0, 1.0);
    EXPECT_DOUBLE_EQ(p.at(0, 2), 3.0);
    EXPECT_DOUBLE_EQ(p.at(1, 2), -0.75);
    EXPECT_DOUBLE_EQ(p.at(2, 2), 3.0);
}

TEST(Jacobi, MatchesExplicitSumForSeveralParameters) {
    Rng rng(2);
    for (double a : {0.0, 1.0, 2.5})
        for (double b : {0.0, 1.0, -0.5})
            for (int rep = 0; rep < 20; ++rep) {
                const double x = rng.uniform(-1.0, 1.0);
                Tensor p = jacobi_basis(Tensor::from({1}, {x}), 6, a, b);
                for (int n = 0; n <= 6; ++n)
                    ASSERT_NEAR(p.at(0, n), jacobi_explicit(n, a, b, x), 1e-11)
                        << "n=" << n << " a=" << a << " b=" << b << " x=" << x;
            }
}

TEST(Jacobi, EndpointValueIsBinomial) {
    Tensor p = jacobi_basis(Tensor::from({1}, {1.0}), 5, 1.0, 1.0);
    for (int n = 0; n <= 5; ++n) EXPECT_NEAR(p.at(0, n), n + 1.0, 1e-13);
}

TEST(Jacobi, TapeAndTensorPathsAgree) {
    Rng rng(3);
    Tensor x = random_tensor(rng, {4, 3});
    ad::Tape tape;
    Tensor viatape = nn::jacobi_basis(tape.constant(x), 3, 1.0, 1.0).value();
    EXPECT_LT(max_abs_diff(viatape, jacobi_basis(x, 3, 1.0, 1.0)), 1e-14);
}

TEST(Jacobi, OutOfRangeInputIsContractViolation) {
    EXPECT_THROW(jacobi_basis(Tensor::from({1}, {1.01}), 3, 1.0, 1.0), ContractViolation);
}

TEST(ResNet, ConfigValidation) {
    EXPECT_THROW(nn::Network(nn::ResNetConfig{2, 4, 3, 1}), ConfigError);
    EXPECT_THROW(nn::Network(nn::ResNetConfig{2, 4, 0, 1}), ConfigError);
}

TEST(ResNet, ProjectionPresentIffWidthsDiffer) {
    EXPECT_EQ(nn::Network(nn::ResNetConfig{3, 5, 2, 1}).projection_param_count(), 3u * 5 + 5);
    EXPECT_EQ(nn::Network(nn::ResNetConfig{5, 5, 2, 1}).projection_param_count(), 0u);
}

TEST(ResNet, ZeroParametersGiveZeroOutput) {
    nn::Network net(nn::ResNetConfig{3, 4, 4, 2});
    std::vector<Tensor> params;
    for (const auto& s : net.param_specs()) params.emplace_back(s.shape);
    Rng rng(4);
    Tensor out = net.forward(params, random_tensor(rng, {5, 3}));
    for (double v : out.data()) EXPECT_EQ(v, 0.0);
}

TEST(ResNet, SingleBlockSkipPathIsolation) {
    // With W1 = W2 = 0 and zero biases, the hidden state is tanh(x P + c).
    nn::Network net(nn::ResNetConfig{2, 3, 2, 3});
    Rng rng(5);
    std::vector<Tensor> params;
    for (const auto& s : net.param_specs()) params.emplace_back(s.shape);
    params[0] = random_tensor(rng, {2, 3});
    params[1] = random_tensor(rng, {3});
    // Identity output layer exposes the hidden state.
    Tensor& w_out = params[params.size() - 2];
    for (std::size_t i = 0; i < 3; ++i) w_out.at(i, i) = 1.0;
    Tensor x = random_tensor(rng, {4, 2});
    Tensor out = net.forward(params, x);
    for (std::size_t n = 0; n < 4; ++n)
        for (std::size_t h = 0; h < 3; ++h) {
            double pre = params[1][h];
            for (std::size_t i = 0; i < 2; ++i) pre += x.at(n, i) * params[0].at(i, h);
            EXPECT_NEAR(out.at(n, h), std::tanh(pre), 1e-15);
        }
}

TEST(ResNet, WidthMismatchThrows) {
    nn::Network net(nn::ResNetConfig{3, 4, 2, 1});
    Rng rng(6);
    auto params = net.init_params(rng);
    EXPECT_THROW(net.forward(params, Tensor({2, 4})), DimensionError);
    params.pop_back();
    EXPECT_THROW(net.forward(params, Tensor({2, 3})), DimensionError);
}

TEST(ResNet, GradientsMatchFiniteDifferences) {
    for (auto act : {nn::Activation::Tanh, nn::Activation::Sin}) {
        nn::Network net(nn::ResNetConfig{3, 4, 4, 2, act});
        Rng rng(7);
        Tensor x = random_tensor(rng, {5, 3});
        auto params = net.init_params(rng);
        for (auto& p : params)
            for (double& v : p.data()) v += rng.uniform(-0.1, 0.1);
        auto res = check_gradients(
            [&](const std::vector<ad::Var>& p) {
                ad::Var out = net.forward(p, p[0].tape->constant(x));
                return ad::mean(ad::mul(out, out));
            },
            params);
        EXPECT_LT(res.rel_error, 1e-6);
    }
}

TEST(ResNet, DeepNetworkStaysFiniteWithNonzeroGradients) {
    nn::Network net(nn::ResNetConfig{1, 16, 20, 3});
    Rng rng(8);
    auto params = net.init_params(rng);
    ad::Tape tape;
    auto vars = as_leaves(tape, params);
    auto x = tape.constant(random_tensor(rng, {1000, 1}, -1.0, 1.0));
    auto out = net.forward(vars, x);
    for (double v : out.value().data()) ASSERT_TRUE(std::isfinite(v));
    auto grads = tape.grad(ad::mean(ad::mul(out, out)), vars);
    for (std::size_t i = 0; i < grads.size(); ++i) {
        double norm = 0.0;
        for (double g : grads[i].data()) {
            ASSERT_TRUE(std::isfinite(g));
            norm += g * g;
        }
        // Biases of the first layers all receive signal through the residual path.
        EXPECT_GT(norm, 0.0) << net.param_specs()[i].name;
    }
}

TEST(ParamCount, BranchResNet) {
    nn::Network net(nn::ResNetConfig{12, 200, 10, 1140});
    EXPECT_EQ(net.param_count() - net.projection_param_count(), 593540u);
    EXPECT_EQ(net.projection_param_count(), 2600u);
}

TEST(ParamCount, TrunkResNet) {
    nn::Network net(nn::ResNetConfig{1, 200, 10, 1140});
    EXPECT_EQ(net.param_count() - net.projection_param_count(), 591340u);
    EXPECT_EQ(net.projection_param_count(), 400u);
}

TEST(ParamCount, TrunkKan) {
    nn::Network net(nn::KanConfig{{1, 75, 75, 75, 75, 1140}, 3, 1.0, 1.0});
    EXPECT_EQ(net.param_count(), 409800u);
}

TEST(Kan, ZeroCoefficientsGiveZeroOutput) {
    nn::Network net(nn::KanConfig{{1, 4, 3}});
    std::vector<Tensor> params;
    for (const auto& s : net.param_specs()) params.emplace_back(s.shape);
    Rng rng(9);
    Tensor out = net.forward(params, random_tensor(rng, {6, 1}, -5.0, 5.0));
    for (double v : out.data()) EXPECT_EQ(v, 0.0);
}

TEST(Kan, ConstantBasisSelection) {
    nn::Network net(nn::KanConfig{{1, 1}});
    Tensor coeff({1, 1, 4});
    coeff[0] = 0.37;
    Rng rng(10);
    Tensor out = net.forward({coeff}, random_tensor(rng, {5, 1}, -10.0, 10.0));
    for (double v : out.data()) EXPECT_DOUBLE_EQ(v, 0.37);
}

TEST(Kan, MatchesDirectLayerEvaluation) {
    nn::Network net(nn::KanConfig{{2, 3, 2}});
    Rng rng(11);
    auto params = net.init_params(rng);
    Tensor x = random_tensor(rng, {4, 2}, -3.0, 3.0);
    Tensor a = x;
    for (const auto& coeff : params) {
        const std::size_t in = coeff.dim(0), out = coeff.dim(1), k = coeff.dim(2);
        Tensor next({a.dim(0), out});
        for (std::size_t n = 0; n < a.dim(0); ++n)
            for (std::size_t l = 0; l < out; ++l) {
                double s = 0.0;
                for (std::size_t j = 0; j < in; ++j)
                    for (std::size_t d = 0; d < k; ++d)
                        s += jacobi_explicit(int(d), 1.0, 1.0, std::sin(a.at(n, j))) *
                             coeff.at(j, l, d);
                next.at(n, l) = s;
            }
        a = next;
    }
    EXPECT_LT(max_abs_diff(net.forward(params, x), a), 1e-13);
}

TEST(Kan, GradientsMatchFiniteDifferences) {
    nn::Network net(nn::KanConfig{{1, 5, 4, 2}});
    Rng rng(12);
    Tensor t = random_tensor(rng, {7, 1}, -1.0, 1.0);
    auto params = net.init_params(rng);
    auto res = check_gradients(
        [&](const std::vector<ad::Var>& p) {
            ad::Var out = net.forward(p, p[0].tape->constant(t));
            return ad::mean(ad::mul(out, out));
        },
        params);
    EXPECT_LT(res.rel_error, 1e-6);
}

TEST(Kan, InitRangeScalesWithFanIn) {
    nn::Network net(nn::KanConfig{{1, 75, 75}});
    Rng rng(13);
    auto params = net.init_params(rng);
    for (double v : params[0].data()) EXPECT_LE(std::abs(v), 1.0 / 4.0);
    for (double v : params[1].data()) EXPECT_LE(std::abs(v), 1.0 / 300.0);
}
