#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "amore/io.hpp"
#include "amore/schema.hpp"
#include "amore/tensor.hpp"

namespace amore::kin {

// Autonomous ODE system dY/dt = f(Y) with an analytic Jacobian (row-major j x j).
// Negative mass-group entries are clipped to zero before every evaluation;
// clip_count() reports how often that happened.
class Mechanism {
  public:
    virtual ~Mechanism() = default;
    virtual std::string name() const = 0;
    virtual const StateSchema& schema() const = 0;
    // Maps grid coordinates (u1, u2) in [0,1]^2 to an initial state.
    virtual std::vector<double> initial_state(double u1, double u2) const = 0;
    // Parameters that define the system, hashed into dataset manifests.
    virtual io::Json describe() const = 0;

    std::size_t dim() const { return schema().size(); }
    void rhs(std::span<const double> y, std::span<double> f) const;
    void jacobian(std::span<const double> y, std::span<double> jac) const;
    long clip_count() const noexcept { return clips_.load(); }

  protected:
    virtual void raw_rhs(std::span<const double> y, std::span<double> f) const = 0;
    virtual void raw_jacobian(std::span<const double> y, std::span<double> jac) const = 0;

  private:
    std::vector<double> clipped(std::span<const double> y) const;
    mutable std::atomic<long> clips_{0};
};

// Robertson's three-species problem with the standard rate constants.
class Rober final : public Mechanism {
  public:
    static constexpr double k1 = 0.04, k2 = 1e4, k3 = 3e7;
    // Largest initial intermediate fraction spanned by the second grid axis.
    static constexpr double max_initial_y2 = 4e-5;
    Rober();
    std::string name() const override { return "rober"; }
    const StateSchema& schema() const override { return schema_; }
    // y2 = 4e-5 u2, y1 = (0.9 + 0.1 u1)(1 - y2), y3 = 1 - y1 - y2.
    std::vector<double> initial_state(double u1, double u2) const override;
    io::Json describe() const override;

  protected:
    void raw_rhs(std::span<const double> y, std::span<double> f) const override;
    void raw_jacobian(std::span<const double> y, std::span<double> jac) const override;

  private:
    StateSchema schema_;
};

// Constant-property adiabatic system: state (T, Y_A, Y_B, Y_C), reactions
// A -> B and B -> C with Arrhenius rates k_i(T) = A_i exp(-E_i / T), equal
// molecular weights, and dT/dt = -(1/c_p) sum_k h_k dY_k/dt.
struct ToyCombustionParams {
    double a1 = 2e8, e1 = 15000.0;
    double a2 = 5e9, e2 = 20000.0;
    std::vector<double> enthalpy{0.0, -4e5, -1.2e6};  // J/kg for A, B, C
    double cp = 1500.0;                                // J/(kg K)
    double t0_min = 1000.0, t0_max = 1200.0;           // first grid axis
    double ya_min = 0.8, ya_max = 1.0;                 // second grid axis (rest is C)
};
ToyCombustionParams toy_params_from_json(const io::Json& j);

class ToyCombustion final : public Mechanism {
  public:
    explicit ToyCombustion(ToyCombustionParams params = {});
    std::string name() const override { return "toy-combustion"; }
    const StateSchema& schema() const override { return schema_; }
    std::vector<double> initial_state(double u1, double u2) const override;
    io::Json describe() const override;
    const ToyCombustionParams& params() const noexcept { return p_; }

  protected:
    void raw_rhs(std::span<const double> y, std::span<double> f) const override;
    void raw_jacobian(std::span<const double> y, std::span<double> jac) const override;

  private:
    ToyCombustionParams p_;
    StateSchema schema_;
};

// User-supplied system, mainly for solver tests.
class CustomRhs final : public Mechanism {
  public:
    using Fn = std::function<void(std::span<const double>, std::span<double>)>;
    CustomRhs(StateSchema schema, Fn rhs, Fn jacobian);
    std::string name() const override { return "custom"; }
    const StateSchema& schema() const override { return schema_; }
    std::vector<double> initial_state(double u1, double u2) const override;
    io::Json describe() const override { return {{"name", "custom"}}; }

  protected:
    void raw_rhs(std::span<const double> y, std::span<double> f) const override { rhs_(y, f); }
    void raw_jacobian(std::span<const double> y, std::span<double> jac) const override {
        jac_(y, jac);
    }

  private:
    StateSchema schema_;
    Fn rhs_, jac_;
};

std::unique_ptr<Mechanism> make_mechanism(const std::string& name, const io::Json& params = {});

struct IntegratorOptions {
    double rtol = 1e-9;
    double atol = 1e-14;
    // Adaptive sub-stepping; when false every output interval is split into
    // `fixed_substeps` equal steps with no error control.
    bool adaptive = true;
    int fixed_substeps = 1;
    int max_newton = 10;
    int max_step_retries = 40;
    double min_step = 1e-18;
};

struct IntegrationStats {
    long steps = 0;
    long rejected = 0;
    long newton_failures = 0;
};

// Second-order L-stable TR-BDF2 step of size h from y. Both stages solve with
// the Newton matrix I - (gamma/2) h J. On success returns true, writes the new
// state and, if `err` is non-null, the local error estimate vector.
bool trbdf2_step(const Mechanism& mech, std::span<const double> y, double h,
                 std::span<double> y_next, std::vector<double>* err,
                 const IntegratorOptions& opts);

// One backward-Euler step (Newton to convergence).
std::vector<double> backward_euler_step(const Mechanism& mech, std::span<const double> y,
                                        double h);

// Integrates from y0 and samples the solution on the uniform grid t_i = i dt,
// i = 0..n_steps. Returns [n_steps + 1, j]. Throws IntegrationError carrying the
// output index that could not be reached.
Tensor integrate(const Mechanism& mech, const std::vector<double>& y0, double dt,
                 std::size_t n_steps, const IntegratorOptions& opts = {},
                 IntegrationStats* stats = nullptr);

}  // namespace amore::kin
