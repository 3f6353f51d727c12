#include <gtest/gtest.h>

#include <cmath>

#include "amore/error.hpp"
#include "amore/kinetics.hpp"
#include "test_support.hpp"

using namespace amore;
using namespace amore::kin;

namespace {

// Robertson at t = 40 from (1, 0, 0), frozen from an independent Radau IIA
// integration at rtol 1e-13 (scipy.integrate.solve_ivp).
constexpr double kRoberAt40[3] = {7.158270687194053e-01, 9.185534764557759e-06,
                                  2.841637457458306e-01};

CustomRhs decay() {
    StateSchema s;
    s.names = {"y"};
    s.log_transform = {true};
    return CustomRhs(
        s, [](auto y, auto f) { f[0] = -y[0]; }, [](auto, auto jac) { jac[0] = -1.0; });
}

// Central finite-difference Jacobian, column by column.
std::vector<double> fd_jacobian(const Mechanism& m, std::vector<double> y) {
    const std::size_t n = m.dim();
    std::vector<double> jac(n * n), fp(n), fm(n);
    for (std::size_t c = 0; c < n; ++c) {
        const double keep = y[c], h = 1e-6 * std::max(1.0, std::abs(keep));
        y[c] = keep + h;
        m.rhs(y, fp);
        y[c] = keep - h;
        m.rhs(y, fm);
        y[c] = keep;
        for (std::size_t r = 0; r < n; ++r) jac[r * n + c] = (fp[r] - fm[r]) / (2 * h);
    }
    return jac;
}

double rel_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0, s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        d += (a[i] - b[i]) * (a[i] - b[i]);
        s += b[i] * b[i];
    }
    return std::sqrt(d / std::max(s, 1e-300));
}

}  // namespace

TEST(Rober, RhsAtPureReactant) {
    Rober m;
    std::vector<double> f(3);
    m.rhs(std::vector<double>{1, 0, 0}, f);
    EXPECT_DOUBLE_EQ(f[0], -0.04);
    EXPECT_DOUBLE_EQ(f[1], 0.04);
    EXPECT_DOUBLE_EQ(f[2], 0.0);
}

TEST(Rober, ProductIsAbsorbing) {
    Rober m;
    std::vector<double> f(3, 1.0);
    m.rhs(std::vector<double>{0, 0, 1}, f);
    for (double v : f) EXPECT_EQ(v, 0.0);
}

TEST(Mechanisms, MassGroupRhsSumsToZero) {
    Rober r;
    ToyCombustion t;
    Rng rng(1);
    for (int rep = 0; rep < 100; ++rep) {
        std::vector<double> y{rng.uniform(), rng.uniform(0, 1e-4), rng.uniform()}, f(3);
        r.rhs(y, f);
        EXPECT_LE(std::abs(f[0] + f[1] + f[2]), 1e-14 * (1 + std::abs(f[0]) + std::abs(f[1])));
        std::vector<double> z{rng.uniform(900, 2000), rng.uniform(), rng.uniform(), rng.uniform()},
            g(4);
        t.rhs(z, g);
        EXPECT_LE(std::abs(g[1] + g[2] + g[3]), 1e-14 * (1 + std::abs(g[1]) + std::abs(g[2])));
    }
}

TEST(ToyCombustion, ZeroEnthalpiesFreezeTemperature) {
    ToyCombustionParams p;
    p.enthalpy = {0.0, 0.0, 0.0};
    ToyCombustion m(p);
    std::vector<double> f(4);
    m.rhs(std::vector<double>{1500.0, 0.5, 0.3, 0.2}, f);
    EXPECT_EQ(f[0], 0.0);
    EXPECT_NE(f[1], 0.0);
}

TEST(Mechanisms, JacobianMatchesFiniteDifferences) {
    Rober r;
    ToyCombustion t;
    Rng rng(2);
    for (int rep = 0; rep < 100; ++rep) {
        std::vector<double> y{rng.uniform(0.1, 1), rng.uniform(1e-6, 1e-4), rng.uniform(0.1, 1)};
        std::vector<double> jac(9);
        r.jacobian(y, jac);
        EXPECT_LT(rel_diff(jac, fd_jacobian(r, y)), 1e-6);
        std::vector<double> z{rng.uniform(900, 2000), rng.uniform(0.1, 1), rng.uniform(0.1, 1),
                              rng.uniform(0.1, 1)};
        std::vector<double> jt(16);
        t.jacobian(z, jt);
        EXPECT_LT(rel_diff(jt, fd_jacobian(t, z)), 1e-6);
    }
}

TEST(Mechanisms, NegativeMassFractionsAreClippedAndCounted) {
    Rober m;
    std::vector<double> f(3);
    m.rhs(std::vector<double>{1.0, -1e-12, 0.0}, f);
    EXPECT_EQ(m.clip_count(), 1);
    EXPECT_DOUBLE_EQ(f[1], 0.04);
}

TEST(Integrator, BackwardEulerStepOnDecay) {
    auto m = decay();
    auto y = backward_euler_step(m, std::vector<double>{1.0}, 0.1);
    EXPECT_NEAR(y[0], 1.0 / 1.1, 1e-15);
}

TEST(Integrator, SecondOrderOnLinearDecay) {
    auto m = decay();
    IntegratorOptions o;
    o.adaptive = false;
    std::vector<double> errs;
    for (int n = 10; n <= 320; n *= 2) {
        o.fixed_substeps = n;
        Tensor y = integrate(m, {1.0}, 1.0, 1, o);
        errs.push_back(std::abs(y[1] - std::exp(-1.0)));
    }
    for (std::size_t i = 1; i < errs.size(); ++i) {
        const double ratio = errs[i - 1] / errs[i];
        EXPECT_NEAR(ratio, 4.0, 0.1) << "halving " << i;
    }
}

TEST(Integrator, AdaptiveDecayIsAccurate) {
    auto m = decay();
    Tensor y = integrate(m, {1.0}, 0.1, 20);
    for (std::size_t i = 0; i <= 20; ++i)
        EXPECT_NEAR(y[i], std::exp(-0.1 * double(i)), 1e-6 * std::exp(-0.1 * double(i)));
}

TEST(Integrator, RoberAtFortyMatchesReference) {
    Rober m;
    IntegrationStats st;
    Tensor y = integrate(m, {1, 0, 0}, 1.0, 40, {}, &st);
    for (int a = 0; a < 3; ++a)
        EXPECT_NEAR(y.at(40, a), kRoberAt40[a], 1e-6 * kRoberAt40[a]) << "state " << a;
    for (std::size_t i = 0; i <= 40; ++i)
        EXPECT_LT(std::abs(y.at(i, 0) + y.at(i, 1) + y.at(i, 2) - 1.0), 1e-10);
    EXPECT_GT(st.steps, 40);
}

TEST(Integrator, RoberSelfOracleAgreesWithTightTolerance) {
    Rober m;
    IntegratorOptions tight;
    tight.rtol = 1e-12;
    tight.atol = 1e-20;
    Tensor ref = integrate(m, {1, 0, 0}, 1.0, 40, tight);
    for (int a = 0; a < 3; ++a) EXPECT_NEAR(ref.at(40, a), kRoberAt40[a], 1e-8 * kRoberAt40[a]);
    Tensor y = integrate(m, {1, 0, 0}, 1.0, 40);
    for (int a = 0; a < 3; ++a) EXPECT_NEAR(y.at(40, a), ref.at(40, a), 1e-6 * ref.at(40, a));
}

TEST(Integrator, FixedStepRichardsonAgreesWithAdaptive) {
    // Halved-step extrapolation on the smooth part of the trajectory.
    Rober m;
    Tensor start = integrate(m, {1, 0, 0}, 1.0, 1);
    std::vector<double> y1{start.at(1, 0), start.at(1, 1), start.at(1, 2)};
    IntegratorOptions o;
    o.adaptive = false;
    o.fixed_substeps = 2000;
    Tensor coarse = integrate(m, y1, 39.0, 1, o);
    o.fixed_substeps = 4000;
    Tensor fine = integrate(m, y1, 39.0, 1, o);
    for (int a = 0; a < 3; ++a) {
        const double extrap = (4.0 * fine.at(1, a) - coarse.at(1, a)) / 3.0;
        EXPECT_NEAR(extrap, kRoberAt40[a], 1e-6 * kRoberAt40[a]) << "state " << a;
    }
}

TEST(Integrator, ToyCombustionConservesMassAndHeats) {
    ToyCombustion m;
    const auto y0 = m.initial_state(1.0, 1.0);
    Tensor y = integrate(m, y0, 1e-4, 200);
    for (std::size_t i = 0; i <= 200; ++i) {
        EXPECT_LT(std::abs(y.at(i, 1) + y.at(i, 2) + y.at(i, 3) - 1.0), 1e-10);
        if (i > 0) {
            EXPECT_GE(y.at(i, 0), y.at(i - 1, 0) - 1e-9);
        }
    }
    EXPECT_GT(y.at(200, 0), y0[0] + 1.0);
}

TEST(Integrator, InvalidInputs) {
    Rober m;
    EXPECT_THROW(integrate(m, {1, 0}, 1.0, 1), DimensionError);
    EXPECT_THROW(integrate(m, {1, 0, 0}, 0.0, 1), ConfigError);
}
