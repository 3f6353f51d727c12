#include "amore/kinetics.hpp"

#include <algorithm>
#include <cmath>

#include "amore/error.hpp"
#include "amore/linalg.hpp"

namespace amore::kin {

std::vector<double> Mechanism::clipped(std::span<const double> y) const {
    std::vector<double> c(y.begin(), y.end());
    for (auto k : schema().mass_group) {
        if (c[k] < 0.0) {
            c[k] = 0.0;
            clips_.fetch_add(1, std::memory_order_relaxed);
        }
    }
    return c;
}

void Mechanism::rhs(std::span<const double> y, std::span<double> f) const {
    const auto c = clipped(y);
    raw_rhs(c, f);
}

void Mechanism::jacobian(std::span<const double> y, std::span<double> jac) const {
    const auto c = clipped(y);
    raw_jacobian(c, jac);
}

Rober::Rober() {
    schema_.names = {"y1", "y2", "y3"};
    schema_.mass_group = {0, 1, 2};
    schema_.log_transform = {true, true, true};
}

std::vector<double> Rober::initial_state(double u1, double u2) const {
    const double y2 = max_initial_y2 * u2;
    const double y1 = (0.9 + 0.1 * u1) * (1.0 - y2);
    return {y1, y2, 1.0 - y1 - y2};
}

io::Json Rober::describe() const {
    return {{"name", "rober"}, {"k1", k1}, {"k2", k2}, {"k3", k3}};
}

void Rober::raw_rhs(std::span<const double> y, std::span<double> f) const {
    const double r1 = k1 * y[0], r2 = k2 * y[1] * y[2], r3 = k3 * y[1] * y[1];
    f[0] = -r1 + r2;
    f[1] = r1 - r2 - r3;
    f[2] = r3;
}

void Rober::raw_jacobian(std::span<const double> y, std::span<double> jac) const {
    jac[0] = -k1;
    jac[1] = k2 * y[2];
    jac[2] = k2 * y[1];
    jac[3] = k1;
    jac[4] = -k2 * y[2] - 2.0 * k3 * y[1];
    jac[5] = -k2 * y[1];
    jac[6] = 0.0;
    jac[7] = 2.0 * k3 * y[1];
    jac[8] = 0.0;
}

ToyCombustionParams toy_params_from_json(const io::Json& j) {
    ToyCombustionParams p;
    try {
        p.a1 = j.value("a1", p.a1);
        p.e1 = j.value("e1", p.e1);
        p.a2 = j.value("a2", p.a2);
        p.e2 = j.value("e2", p.e2);
        p.enthalpy = j.value("enthalpy", p.enthalpy);
        p.cp = j.value("cp", p.cp);
        p.t0_min = j.value("t0_min", p.t0_min);
        p.t0_max = j.value("t0_max", p.t0_max);
        p.ya_min = j.value("ya_min", p.ya_min);
        p.ya_max = j.value("ya_max", p.ya_max);
    } catch (const io::Json::exception& e) {
        throw ConfigError(std::string("toy combustion parameters: ") + e.what());
    }
    if (p.enthalpy.size() != 3) throw ConfigError("toy combustion: need three enthalpies");
    if (!(p.cp > 0.0)) throw ConfigError("toy combustion: cp must be positive");
    return p;
}

ToyCombustion::ToyCombustion(ToyCombustionParams params) : p_(std::move(params)) {
    schema_.names = {"T", "A", "B", "C"};
    schema_.temperature_index = 0;
    schema_.mass_group = {1, 2, 3};
    schema_.log_transform = {true, true, true, true};
}

std::vector<double> ToyCombustion::initial_state(double u1, double u2) const {
    const double t0 = p_.t0_min + (p_.t0_max - p_.t0_min) * u1;
    const double ya = p_.ya_min + (p_.ya_max - p_.ya_min) * u2;
    return {t0, ya, 0.0, 1.0 - ya};
}

io::Json ToyCombustion::describe() const {
    return {{"name", "toy-combustion"}, {"a1", p_.a1},       {"e1", p_.e1},
            {"a2", p_.a2},              {"e2", p_.e2},       {"enthalpy", p_.enthalpy},
            {"cp", p_.cp},              {"t0_min", p_.t0_min}, {"t0_max", p_.t0_max},
            {"ya_min", p_.ya_min},      {"ya_max", p_.ya_max}};
}

void ToyCombustion::raw_rhs(std::span<const double> y, std::span<double> f) const {
    const double t = y[0];
    const double w1 = p_.a1 * std::exp(-p_.e1 / t) * y[1];
    const double w2 = p_.a2 * std::exp(-p_.e2 / t) * y[2];
    f[1] = -w1;
    f[2] = w1 - w2;
    f[3] = w2;
    const auto& h = p_.enthalpy;
    f[0] = -(h[0] * f[1] + h[1] * f[2] + h[2] * f[3]) / p_.cp;
}

void ToyCombustion::raw_jacobian(std::span<const double> y, std::span<double> jac) const {
    const double t = y[0];
    const double k1 = p_.a1 * std::exp(-p_.e1 / t), k2 = p_.a2 * std::exp(-p_.e2 / t);
    // d(w)/d(T, A, B, C) for both reaction rates.
    const double dw1[4] = {k1 * p_.e1 / (t * t) * y[1], k1, 0.0, 0.0};
    const double dw2[4] = {k2 * p_.e2 / (t * t) * y[2], 0.0, k2, 0.0};
    const auto& h = p_.enthalpy;
    for (int c = 0; c < 4; ++c) {
        const double da = -dw1[c], db = dw1[c] - dw2[c], dc = dw2[c];
        jac[4 + c] = da;
        jac[8 + c] = db;
        jac[12 + c] = dc;
        jac[c] = -(h[0] * da + h[1] * db + h[2] * dc) / p_.cp;
    }
}

CustomRhs::CustomRhs(StateSchema schema, Fn rhs, Fn jacobian)
    : schema_(std::move(schema)), rhs_(std::move(rhs)), jac_(std::move(jacobian)) {
    schema_.validate();
}

std::vector<double> CustomRhs::initial_state(double, double) const {
    throw ConfigError("custom mechanism has no initial-state grid");
}

std::unique_ptr<Mechanism> make_mechanism(const std::string& name, const io::Json& params) {
    if (name == "rober") return std::make_unique<Rober>();
    if (name == "toy-combustion" || name == "toy") {
        return std::make_unique<ToyCombustion>(
            params.is_null() ? ToyCombustionParams{} : toy_params_from_json(params));
    }
    throw ConfigError("unknown mechanism '" + name + "' (expected rober or toy-combustion)");
}

namespace {

const double kGamma = 2.0 - std::sqrt(2.0);
// Diagonal coefficient shared by both stages: gamma/2 == (1-gamma)/(2-gamma).
const double kDiag = kGamma / 2.0;

// Newton matrix I - c h J, row-major.
std::vector<double> newton_matrix(const Mechanism& mech, std::span<const double> y, double ch) {
    const std::size_t n = mech.dim();
    std::vector<double> m(n * n);
    mech.jacobian(y, m);
    for (std::size_t i = 0; i < n * n; ++i) m[i] *= -ch;
    for (std::size_t i = 0; i < n; ++i) m[i * n + i] += 1.0;
    return m;
}

double scaled_norm(std::span<const double> v, std::span<const double> y0,
                   std::span<const double> y1, const IntegratorOptions& o) {
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double sc = o.atol + o.rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
        s += (v[i] / sc) * (v[i] / sc);
    }
    return std::sqrt(s / double(v.size()));
}

// Solves x - ch f(x) = rhs by simplified Newton with the fixed matrix `m`,
// starting from x. Returns false on divergence or iteration cap.
bool newton_solve(const Mechanism& mech, const std::vector<double>& m, double ch,
                  const std::vector<double>& rhs, std::vector<double>& x,
                  std::span<const double> ref, const IntegratorOptions& o, int max_iter) {
    const std::size_t n = x.size();
    std::vector<double> f(n), r(n);
    double prev = 0.0;
    for (int it = 0; it < max_iter; ++it) {
        mech.rhs(x, f);
        for (std::size_t i = 0; i < n; ++i) r[i] = rhs[i] - (x[i] - ch * f[i]);
        std::vector<double> dx;
        try {
            dx = solve_dense(m, r, n);
        } catch (const SingularityError&) {
            return false;
        }
        for (std::size_t i = 0; i < n; ++i) x[i] += dx[i];
        for (double v : x)
            if (!std::isfinite(v)) return false;
        const double nrm = scaled_norm(dx, ref, x, o);
        if (nrm <= 1e-3) return true;
        if (it > 0 && nrm > 0.9 * prev && nrm > 1.0) return false;
        prev = nrm;
    }
    return false;
}

}  // namespace

bool trbdf2_step(const Mechanism& mech, std::span<const double> y, double h,
                 std::span<double> y_next, std::vector<double>* err,
                 const IntegratorOptions& opts) {
    const std::size_t n = mech.dim();
    const double ch = kDiag * h;
    const auto m = newton_matrix(mech, y, ch);
    std::vector<double> fn(n);
    mech.rhs(y, fn);
    const int max_iter = opts.adaptive ? opts.max_newton : std::max(opts.max_newton, 30);
    IntegratorOptions tight = opts;
    if (!opts.adaptive) {
        tight.rtol = 1e-12;
        tight.atol = 1e-300;
    }

    // Stage 1, trapezoid to t + gamma h.
    std::vector<double> rhs1(n), yg(y.begin(), y.end());
    for (std::size_t i = 0; i < n; ++i) {
        rhs1[i] = y[i] + ch * fn[i];
        yg[i] = y[i] + kGamma * h * fn[i];
    }
    if (!newton_solve(mech, m, ch, rhs1, yg, y, tight, max_iter)) return false;
    std::vector<double> fg(n);
    mech.rhs(yg, fg);

    // Stage 2, BDF2 through y_n, y_gamma.
    const double c1 = 1.0 / (kGamma * (2.0 - kGamma));
    const double c0 = (1.0 - kGamma) * (1.0 - kGamma) / (kGamma * (2.0 - kGamma));
    std::vector<double> rhs2(n), y1(n);
    for (std::size_t i = 0; i < n; ++i) {
        rhs2[i] = c1 * yg[i] - c0 * y[i];
        y1[i] = yg[i] + (1.0 - kGamma) * h * fg[i];
    }
    if (!newton_solve(mech, m, ch, rhs2, y1, y, tight, max_iter)) return false;
    std::copy(y1.begin(), y1.end(), y_next.begin());

    if (err) {
        std::vector<double> f1(n);
        mech.rhs(y1, f1);
        const double kg = (-3.0 * kGamma * kGamma + 4.0 * kGamma - 2.0) / (12.0 * (2.0 - kGamma));
        std::vector<double> e(n);
        for (std::size_t i = 0; i < n; ++i) {
            e[i] = 2.0 * kg * h *
                   (fn[i] / kGamma - fg[i] / (kGamma * (1.0 - kGamma)) + f1[i] / (1.0 - kGamma));
        }
        try {
            *err = solve_dense(m, e, n);
        } catch (const SingularityError&) {
            return false;
        }
    }
    return true;
}

std::vector<double> backward_euler_step(const Mechanism& mech, std::span<const double> y,
                                        double h) {
    const std::size_t n = mech.dim();
    std::vector<double> x(y.begin(), y.end()), f(n), r(n);
    for (int it = 0; it < 50; ++it) {
        mech.rhs(x, f);
        for (std::size_t i = 0; i < n; ++i) r[i] = y[i] - (x[i] - h * f[i]);
        const auto dx = solve_dense(newton_matrix(mech, x, h), r, n);
        double nrm = 0.0, sc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += dx[i];
            nrm = std::max(nrm, std::abs(dx[i]));
            sc = std::max(sc, std::abs(x[i]));
        }
        if (nrm <= 1e-15 * (1.0 + sc)) return x;
    }
    throw IntegrationError("backward Euler: Newton did not converge", 0);
}

Tensor integrate(const Mechanism& mech, const std::vector<double>& y0, double dt,
                 std::size_t n_steps, const IntegratorOptions& opts, IntegrationStats* stats) {
    const std::size_t n = mech.dim();
    if (y0.size() != n) throw DimensionError("integrate: initial state has the wrong length");
    if (!(dt > 0.0)) throw ConfigError("integrate: dt must be positive");
    Tensor out({n_steps + 1, n});
    std::copy(y0.begin(), y0.end(), out.data().begin());
    IntegrationStats local;
    IntegrationStats& st = stats ? *stats : local;

    std::vector<double> y(y0), y1(n), err;
    double h = dt;
    if (opts.adaptive) {
        std::vector<double> f(n);
        mech.rhs(y, f);
        const double fn = scaled_norm(f, y, y, opts);
        h = fn > 0.0 ? std::min(dt, 0.01 / fn) : dt;
        h = std::max(h, opts.min_step);
    }

    for (std::size_t k = 0; k < n_steps; ++k) {
        if (!opts.adaptive) {
            const double hs = dt / opts.fixed_substeps;
            for (int s = 0; s < opts.fixed_substeps; ++s) {
                if (!trbdf2_step(mech, y, hs, y1, nullptr, opts)) {
                    throw IntegrationError("integrate: Newton failed in fixed-step mode",
                                           static_cast<long>(k + 1));
                }
                y.swap(y1);
                ++st.steps;
            }
        } else {
            const double t_end = double(k + 1) * dt;
            double t = double(k) * dt;
            int retries = 0;
            while (t < t_end) {
                const double remaining = t_end - t;
                const bool last = h >= remaining * (1.0 - 1e-12);
                const double hs = last ? remaining : h;
                if (!trbdf2_step(mech, y, hs, y1, &err, opts)) {
                    ++st.newton_failures;
                    h = hs * 0.25;
                    if (++retries > opts.max_step_retries || h < opts.min_step) {
                        throw IntegrationError("integrate: Newton failed to converge",
                                               static_cast<long>(k + 1));
                    }
                    continue;
                }
                const double en = scaled_norm(err, y, y1, opts);
                const double factor =
                    en > 0.0 ? std::clamp(0.9 * std::pow(en, -1.0 / 3.0), 0.2, 4.0) : 4.0;
                if (en > 1.0) {
                    ++st.rejected;
                    h = hs * factor;
                    if (++retries > opts.max_step_retries || h < opts.min_step) {
                        throw IntegrationError("integrate: step size underflow",
                                               static_cast<long>(k + 1));
                    }
                    continue;
                }
                retries = 0;
                y.swap(y1);
                ++st.steps;
                t = last ? t_end : t + hs;
                // A step shortened to land on the grid does not shrink the next one.
                h = last ? std::max(h, hs * factor) : hs * factor;
            }
        }
        for (double v : y) {
            if (!std::isfinite(v)) {
                throw IntegrationError("integrate: non-finite state", static_cast<long>(k + 1));
            }
        }
        std::copy(y.begin(), y.end(), out.data().begin() + (k + 1) * n);
    }
    return out;
}

}  // namespace amore::kin
