#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "amore/deeponet.hpp"
#include "amore/error.hpp"
#include "amore/linalg.hpp"
#include "test_support.hpp"

using namespace amore;
using amore::testing::check_gradients;
using amore::testing::random_tensor;

namespace {

StateSchema three_species() {
    StateSchema s;
    s.names = {"a", "b", "c"};
    s.mass_group = {0, 1, 2};
    s.log_transform = {true, true, true};
    return s;
}

NormalizationParams three_norm() {
    return {{-1.0, -12.0, -8.0}, {0.0, -9.0, -0.5}};
}

nn::ResNetConfig branch_cfg(std::size_t j, std::size_t p) {
    nn::ResNetConfig b;
    b.input_dim = j;
    b.hidden_width = 8;
    b.num_hidden_layers = 2;
    b.output_dim = j * p;
    return b;
}

nn::KanConfig trunk_cfg(std::size_t j, std::size_t p) {
    nn::KanConfig k;
    k.layer_dims = {1, 6, j * p};
    return k;
}

DeepONetModel small_model(Paradigm paradigm, std::uint64_t seed = 1, std::size_t p = 4,
                          std::size_t nt = 9) {
    Rng rng(seed);
    return make_model(three_species(), three_norm(), branch_cfg(3, p), trunk_cfg(3, p), p, paradigm,
                      nt, 0.01, rng);
}

}  // namespace

TEST(Schema, ValidationRules) {
    auto s = three_species();
    EXPECT_NO_THROW(s.validate());
    s.temperature_index = 1;
    EXPECT_THROW(s.validate(), ConfigError);
    s = three_species();
    s.log_transform.pop_back();
    EXPECT_THROW(s.validate(), ConfigError);
    s = three_species();
    s.mass_group = {0, 5};
    EXPECT_THROW(s.validate(), ConfigError);
}

TEST(Normalization, EndpointsMapToUnitInterval) {
    const auto s = three_species();
    const auto n = three_norm();
    Tensor lo({1, 3}), hi({1, 3});
    for (std::size_t a = 0; a < 3; ++a) {
        lo[a] = std::exp(n.min[a]);
        hi[a] = std::exp(n.max[a]);
    }
    Tensor l = normalize(lo, s, n), h = normalize(hi, s, n);
    for (std::size_t a = 0; a < 3; ++a) {
        EXPECT_NEAR(l[a], -1.0, 1e-13);
        EXPECT_NEAR(h[a], 1.0, 1e-13);
    }
}

TEST(Normalization, RoundTripIsExact) {
    Rng rng(3);
    StateSchema s = three_species();
    s.names.push_back("T");
    s.temperature_index = 3;
    s.log_transform.push_back(false);
    Tensor raw({20, 30, 4});
    for (std::size_t i = 0; i < raw.size(); ++i)
        raw[i] = i % 4 == 3 ? rng.uniform(900.0, 2500.0) : std::exp(rng.uniform(-20.0, 0.0));
    const auto n = fit_normalization(raw, s);
    Tensor back = denormalize(normalize(raw, s, n), s, n);
    double worst = 0.0;
    for (std::size_t i = 0; i < raw.size(); ++i) worst = std::max(worst, std::abs(back[i] / raw[i] - 1.0));
    EXPECT_LT(worst, 1e-12);
}

TEST(Normalization, ConstantStateGetsMargin) {
    StateSchema s;
    s.names = {"x"};
    s.log_transform = {false};
    const auto n = fit_normalization(Tensor({5, 1}, 2.0), s);
    EXPECT_GT(n.max[0], n.min[0]);
    EXPECT_NEAR(normalize(Tensor({1, 1}, 2.0), s, n)[0], 0.0, 1e-15);
}

TEST(Normalization, NonPositiveUnderLogNamesTheEntry) {
    const auto s = three_species();
    Tensor raw({2, 3}, 0.5);
    raw.at(1, 2) = 0.0;
    try {
        normalize(raw, s, three_norm());
        FAIL() << "expected DomainError";
    } catch (const DomainError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("row 1"), std::string::npos) << msg;
        EXPECT_NE(msg.find("(c)"), std::string::npos) << msg;
    }
}

TEST(Normalization, TapeDenormalizeMatchesAndDifferentiates) {
    StateSchema s = three_species();
    s.log_transform = {true, false, true};
    const auto n = three_norm();
    Rng rng(4);
    Tensor x = random_tensor(rng, {2, 5, 3});
    ad::Tape tape;
    Tensor via_tape = denormalize(tape.constant(x), s, n).value();
    Tensor direct = denormalize(x, s, n);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(via_tape[i], direct[i], 1e-15 * std::abs(direct[i]) + 1e-300);
    auto g = check_gradients([&](const auto& v) { return ad::sum(denormalize(v[0], s, n)); }, {x});
    EXPECT_LT(g.rel_error, 1e-6);
}

TEST(Model, MakeValidatesWidths) {
    Rng rng(1);
    auto bad = branch_cfg(3, 4);
    bad.output_dim = 10;
    EXPECT_THROW(make_model(three_species(), three_norm(), bad, trunk_cfg(3, 4), 4, Paradigm::OneStep,
                            9, 0.01, rng),
                 ConfigError);
    auto m = small_model(Paradigm::TwoStep);
    EXPECT_FALSE(m.pou);
    EXPECT_EQ(m.bound, 0.0);
    m.pou = true;
    EXPECT_THROW(m.validate(), ConfigError);
}

TEST(Model, PartitionOfUnityOnRandomTrunks) {
    // 100 random trunks x 100 random times = 1e4 (parameter, time) draws.
    Rng rng(5);
    auto m = small_model(Paradigm::OneStep);
    double worst_sum = 0.0, lo = 1.0, hi = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
        m.trunk_params = m.trunk.init_params(rng);
        for (auto& t : m.trunk_params)
            for (double& v : t.data()) v *= rng.uniform(0.5, 3.0);
        ad::Tape tape;
        std::vector<ad::Var> tp;
        for (const auto& t : m.trunk_params) tp.push_back(tape.constant(t));
        Tensor times = random_tensor(rng, {100, 1});
        Tensor c = trunk_basis(m, tp, tape.constant(times), true).value();
        for (std::size_t i = 0; i < 100; ++i)
            for (std::size_t a = 0; a < 3; ++a) {
                double s = 0.0;
                for (std::size_t k = 0; k < m.p; ++k) {
                    const double v = c[(i * 3 + a) * m.p + k];
                    lo = std::min(lo, v);
                    hi = std::max(hi, v);
                    s += v;
                }
                worst_sum = std::max(worst_sum, std::abs(s - 1.0));
            }
    }
    EXPECT_LT(worst_sum, 1e-12);
    EXPECT_GT(lo, 0.0);
    EXPECT_LT(hi, 1.0);
}

TEST(Model, ConstantBranchGivesConstantPrediction) {
    auto m = small_model(Paradigm::OneStep);
    m.bound = 0.0;
    const std::size_t nb = m.branch_params.size();
    for (double& v : m.branch_params[nb - 2].data()) v = 0.0;  // output weights
    const double c[3] = {0.3, -0.7, 0.1};
    for (std::size_t a = 0; a < 3; ++a)
        for (std::size_t k = 0; k < m.p; ++k) m.branch_params[nb - 1][a * m.p + k] = c[a];
    Rng rng(6);
    Tensor y = forward_one_step(m, random_tensor(rng, {4, 3}));
    for (std::size_t b = 0; b < 4; ++b)
        for (std::size_t i = 0; i < m.num_times(); ++i)
            for (std::size_t a = 0; a < 3; ++a) EXPECT_NEAR(y.at(b, i, a), c[a], 1e-14);
}

TEST(Model, BoundLimitsOutputs) {
    auto m = small_model(Paradigm::OneStep);
    for (auto& t : m.branch_params)
        for (double& v : t.data()) v *= 50.0;
    Rng rng(7);
    Tensor y = forward_one_step(m, random_tensor(rng, {16, 3}));
    double peak = 0.0;
    for (double v : y.data()) {
        // tanh rounds to exactly 1 in double precision for large inputs.
        EXPECT_LE(std::abs(v), 1.05);
        peak = std::max(peak, std::abs(v));
    }
    EXPECT_GT(peak, 1.0);
    for (double x : {-3.0, -0.5, 0.0, 0.9, 3.0}) EXPECT_LT(std::abs(1.05 * std::tanh(x)), 1.05);
}

TEST(Model, StateBlocksAreIndependent) {
    auto m = small_model(Paradigm::OneStep);
    Rng rng(8);
    Tensor y0 = random_tensor(rng, {3, 3});
    Tensor base = forward_one_step(m, y0);
    const std::size_t nb = m.branch_params.size();
    for (std::size_t k = 0; k < m.p; ++k) m.branch_params[nb - 1][1 * m.p + k] += 0.3 * double(k + 1);
    Tensor moved = forward_one_step(m, y0);
    double changed = 0.0;
    for (std::size_t b = 0; b < 3; ++b)
        for (std::size_t i = 0; i < m.num_times(); ++i) {
            EXPECT_EQ(moved.at(b, i, 0), base.at(b, i, 0));
            EXPECT_EQ(moved.at(b, i, 2), base.at(b, i, 2));
            changed = std::max(changed, std::abs(moved.at(b, i, 1) - base.at(b, i, 1)));
        }
    EXPECT_GT(changed, 1e-3);
}

TEST(Model, OneStepGradientsMatchFiniteDifferences) {
    auto m = small_model(Paradigm::OneStep, 2, 2, 5);
    Rng rng(9);
    Tensor target = random_tensor(rng, {2, 5, 3});
    for (int rep = 0; rep < 100; ++rep) {
        Tensor y0 = random_tensor(rng, {2, 3});
        auto params = m.branch_params;
        params.insert(params.end(), m.trunk_params.begin(), m.trunk_params.end());
        for (auto& t : params) t = random_tensor(rng, t.shape(), -0.8, 0.8);
        const std::size_t nb = m.branch_params.size();
        auto g = check_gradients(
            [&](const std::vector<ad::Var>& v) {
                std::span<const ad::Var> all(v);
                ad::Tape& tape = *v[0].tape;
                ad::Var out = forward_one_step(m, all.subspan(0, nb), all.subspan(nb),
                                               tape.constant(y0), tape.constant(m.time_grid));
                ad::Var d = ad::sub(out, tape.constant(target));
                return ad::mean(ad::mul(d, d));
            },
            params);
        EXPECT_LT(g.rel_error, 1e-6) << "draw " << rep;
    }
}

TEST(Model, TwoStepNeedsFactorizedTrunk) {
    auto m = small_model(Paradigm::TwoStep);
    EXPECT_THROW(forward_two_step(m, Tensor({1, 3})), ConfigError);
    EXPECT_THROW(predict_normalized(m, Tensor({1, 3})), ConfigError);
}

TEST(Model, TwoStepPathsAgreeAndZeroBranchGivesZero) {
    auto m = small_model(Paradigm::TwoStep, 3, 4, 12);
    ad::Tape tape;
    std::vector<ad::Var> tp;
    for (const auto& t : m.trunk_params) tp.push_back(tape.constant(t));
    Tensor c = trunk_basis(m, tp, tape.constant(m.time_grid), false).value();
    m.q_star = Tensor({3, 12, 4});
    m.r_star = Tensor({3, 4, 4});
    for (std::size_t a = 0; a < 3; ++a) {
        Tensor block({12, 4});
        for (std::size_t i = 0; i < 12; ++i)
            for (std::size_t k = 0; k < 4; ++k) block[i * 4 + k] = c.at(i, a, k);
        auto f = qr_thin(block);
        std::copy(f.q.data().begin(), f.q.data().end(), m.q_star.data().begin() + a * 48);
        std::copy(f.r.data().begin(), f.r.data().end(), m.r_star.data().begin() + a * 16);
    }
    Rng rng(10);
    Tensor y0 = random_tensor(rng, {5, 3});
    Tensor via_q = forward_two_step(m, y0), via_r = forward_two_step_via_trunk(m, y0);
    double scale = 0.0;
    for (double v : via_q.data()) scale = std::max(scale, std::abs(v));
    for (std::size_t i = 0; i < via_q.size(); ++i) EXPECT_NEAR(via_q[i], via_r[i], 1e-10 * scale);

    for (auto& t : m.branch_params)
        for (double& v : t.data()) v = 0.0;
    const Tensor zero = forward_two_step(m, y0);
    for (double v : zero.data()) EXPECT_EQ(v, 0.0);
}

TEST(Model, TwoStepReconstructsProjectedTarget) {
    // Branch emits Q*^T y for a fixed target y in span(Q*): prediction equals y.
    auto m = small_model(Paradigm::TwoStep, 4, 3, 10);
    Rng rng(11);
    m.q_star = Tensor({3, 10, 3});
    m.r_star = Tensor({3, 3, 3});
    Tensor coef = random_tensor(rng, {3, 3});
    for (std::size_t a = 0; a < 3; ++a) {
        auto f = qr_thin(random_tensor(rng, {10, 3}));
        std::copy(f.q.data().begin(), f.q.data().end(), m.q_star.data().begin() + a * 30);
        for (std::size_t k = 0; k < 3; ++k) m.r_star[a * 9 + k * 4] = 1.0;
    }
    const std::size_t nb = m.branch_params.size();
    for (double& v : m.branch_params[nb - 2].data()) v = 0.0;
    for (std::size_t i = 0; i < 9; ++i) m.branch_params[nb - 1][i] = coef[i];
    Tensor y = forward_two_step(m, Tensor({1, 3}));
    for (std::size_t a = 0; a < 3; ++a)
        for (std::size_t i = 0; i < 10; ++i) {
            double ref = 0.0;
            for (std::size_t k = 0; k < 3; ++k) ref += m.q_star.at(a, i, k) * coef[a * 3 + k];
            EXPECT_NEAR(y.at(0, i, a), ref, 1e-14);
        }
}

TEST(Model, RecursiveSingleSegmentIsOneForward) {
    auto m = small_model(Paradigm::OneStep);
    Tensor y0 = Tensor::from({2, 3}, {0.7, 1e-5, 0.3, 0.9, 3e-5, 0.1});
    Tensor once = predict_raw(m, y0), rolled = recursive_predict(m, y0, 1);
    ASSERT_EQ(once.shape(), rolled.shape());
    for (std::size_t i = 0; i < once.size(); ++i) EXPECT_EQ(once[i], rolled[i]);
}

TEST(Model, RecursiveChainsSegmentsAndRejectsBadCounts) {
    auto m = small_model(Paradigm::OneStep);
    Tensor y0 = Tensor::from({1, 3}, {0.7, 1e-5, 0.3});
    Tensor r = recursive_predict(m, y0, 3);
    const std::size_t nt = m.num_times();
    EXPECT_EQ(r.dim(1), 3 * (nt - 1) + 1);
    Tensor seed({1, 3});
    for (std::size_t a = 0; a < 3; ++a) seed[a] = r.at(0, nt - 1, a);
    Tensor second = predict_raw(m, seed);
    // The shared endpoint keeps the first segment's value.
    for (std::size_t a = 0; a < 3; ++a) EXPECT_EQ(r.at(0, nt - 1, a), seed[a]);
    for (std::size_t i = 1; i < nt; ++i)
        for (std::size_t a = 0; a < 3; ++a) EXPECT_EQ(r.at(0, nt - 1 + i, a), second.at(0, i, a));
    EXPECT_THROW(recursive_predict(m, y0, 0), ConfigError);
}

TEST(Model, RecursiveDivergenceNamesSegment) {
    auto m = small_model(Paradigm::OneStep);
    m.bound = 0.0;
    for (auto& t : m.branch_params)
        for (double& v : t.data()) v *= 1e3;  // drives outputs far outside the normalized range
    Tensor y0 = Tensor::from({1, 3}, {0.7, 1e-5, 0.3});
    try {
        recursive_predict(m, y0, 20);
        SUCCEED();
    } catch (const RolloutDivergenceError& e) {
        EXPECT_GE(e.segment(), 0);
        EXPECT_LT(e.segment(), 20);
    }
    EXPECT_THROW(recursive_predict(m, Tensor::from({1, 3}, {0.7, 0.0, 0.3}), 2), RolloutDivergenceError);
}

TEST(Model, CheckpointRoundTrip) {
    for (Paradigm par : {Paradigm::OneStep, Paradigm::TwoStep}) {
        auto m = small_model(par, 12);
        if (par == Paradigm::TwoStep) {
            Rng rng(13);
            m.q_star = random_tensor(rng, {3, m.num_times(), m.p});
            m.r_star = random_tensor(rng, {3, m.p, m.p});
        }
        const auto dir = std::filesystem::temp_directory_path() / "amore_ckpt_test";
        std::filesystem::remove_all(dir);
        save_checkpoint(m, dir);
        auto back = load_checkpoint(dir);
        EXPECT_EQ(back.schema, m.schema);
        EXPECT_EQ(back.norm, m.norm);
        EXPECT_EQ(back.p, m.p);
        EXPECT_EQ(back.paradigm, m.paradigm);
        EXPECT_EQ(back.pou, m.pou);
        EXPECT_EQ(back.bound, m.bound);
        ASSERT_EQ(back.branch_params.size(), m.branch_params.size());
        for (std::size_t i = 0; i < m.branch_params.size(); ++i)
            EXPECT_EQ(back.branch_params[i].buffer(), m.branch_params[i].buffer());
        for (std::size_t i = 0; i < m.trunk_params.size(); ++i)
            EXPECT_EQ(back.trunk_params[i].buffer(), m.trunk_params[i].buffer());
        EXPECT_EQ(back.q_star.buffer(), m.q_star.buffer());
        EXPECT_EQ(back.r_star.buffer(), m.r_star.buffer());
        EXPECT_EQ(back.time_grid.buffer(), m.time_grid.buffer());
        std::filesystem::remove_all(dir);
    }
    EXPECT_THROW(load_checkpoint("/nonexistent/amore"), IoError);
}
