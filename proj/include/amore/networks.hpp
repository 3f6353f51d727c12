#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "amore/autodiff.hpp"
#include "amore/rng.hpp"
#include "amore/tensor.hpp"

namespace amore::nn {

enum class Activation { Tanh, Sin };

// MLP built from residual blocks of two layers each:
//   z1 = act(x W1 + b1),  z2 = z1 W2 + b2,  z = act(z2 + skip(x))
// where skip is the identity, or an affine projection (no activation) when the
// block input width differs from hidden_width. The output layer is affine.
struct ResNetConfig {
    std::size_t input_dim = 1;
    std::size_t hidden_width = 32;
    std::size_t num_hidden_layers = 4;  // must be even: two layers per block
    std::size_t output_dim = 1;
    Activation activation = Activation::Tanh;
};

// Kolmogorov-Arnold network with Jacobi-polynomial edges. layer_dims lists the
// node counts [d0, d1, ..., dL]; layer i owns coefficients [d_i, d_{i+1}, order+1].
struct KanConfig {
    std::vector<std::size_t> layer_dims{1, 16, 16};
    std::size_t order = 3;
    double alpha = 1.0;
    double beta = 1.0;
};

using NetworkConfig = std::variant<ResNetConfig, KanConfig>;

struct ParamSpec {
    std::string name;
    Shape shape;
};

// Jacobi polynomials P_0..P_order of x, stacked on a new trailing axis, from
// the three-term recurrence
//   a1 P_{n+1} = (a2 + a3 x) P_n - a4 P_{n-1},  P_0 = 1,  P_1 = ((a-b) + (a+b+2) x) / 2
// Inputs must lie in [-1, 1].
Tensor jacobi_basis(const Tensor& x, std::size_t order, double alpha, double beta);
ad::Var jacobi_basis(ad::Var x, std::size_t order, double alpha, double beta);

class Network {
  public:
    explicit Network(NetworkConfig cfg);

    const NetworkConfig& config() const noexcept { return cfg_; }
    bool is_kan() const noexcept { return std::holds_alternative<KanConfig>(cfg_); }
    std::size_t input_dim() const;
    std::size_t output_dim() const;

    const std::vector<ParamSpec>& param_specs() const noexcept { return specs_; }
    std::size_t param_count() const;
    // Projection-layer parameters only (zero for KAN or when no projection is needed).
    std::size_t projection_param_count() const;

    std::vector<Tensor> init_params(Rng& rng) const;

    // Records the forward pass on x's tape.
    ad::Var forward(std::span<const ad::Var> params, ad::Var x) const;
    // Tape-free convenience wrapper.
    Tensor forward(const std::vector<Tensor>& params, const Tensor& x) const;

  private:
    void check_params(std::span<const ad::Var> params) const;

    NetworkConfig cfg_;
    std::vector<ParamSpec> specs_;
    bool has_projection_ = false;
};

std::string describe(const NetworkConfig& cfg);

}  // namespace amore::nn
