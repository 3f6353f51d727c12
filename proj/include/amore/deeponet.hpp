#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "amore/autodiff.hpp"
#include "amore/io.hpp"
#include "amore/networks.hpp"
#include "amore/schema.hpp"
#include "amore/tensor.hpp"

namespace amore {

enum class Paradigm { OneStep, TwoStep };

// Multi-output DeepONet. Branch and trunk both emit j*p neurons; output state a
// uses the a-th block of p neurons from each network.
struct DeepONetModel {
    StateSchema schema;
    NormalizationParams norm;
    nn::Network branch{nn::ResNetConfig{}};
    nn::Network trunk{nn::ResNetConfig{}};
    std::vector<Tensor> branch_params;
    std::vector<Tensor> trunk_params;
    std::size_t p = 0;
    Paradigm paradigm = Paradigm::OneStep;
    // One-step only: softmax over the basis axis, and out <- bound * tanh(out) when bound > 0.
    bool pou = true;
    double bound = 1.05;
    // Two-step only: per-state orthonormal trunk basis [j, n_t1, p] and triangular factor [j, p, p].
    Tensor q_star;
    Tensor r_star;
    // Normalized trunk input [n_t1, 1] and the physical spacing of its points.
    Tensor time_grid;
    double dt = 0.0;

    std::size_t num_states() const { return schema.size(); }
    std::size_t num_times() const { return time_grid.dim(0); }
    // Throws ConfigError / DimensionError when networks, schema and grid disagree.
    void validate() const;
};

// n_t1 points spaced uniformly over [-1, 1].
Tensor normalized_time_grid(std::size_t n_t1);

DeepONetModel make_model(StateSchema schema, NormalizationParams norm,
                         const nn::NetworkConfig& branch, const nn::NetworkConfig& trunk,
                         std::size_t p, Paradigm paradigm, std::size_t n_t1, double dt, Rng& rng);

// Trunk basis [n_t1, j, p]; softmax over p when pou is set.
ad::Var trunk_basis(const DeepONetModel& m, std::span<const ad::Var> trunk_params, ad::Var t,
                    bool pou);

// Branch coefficients [bs, j, p].
ad::Var branch_coefficients(const DeepONetModel& m, std::span<const ad::Var> branch_params,
                            ad::Var y0_norm);

// One-step prediction in normalized space, [bs, n_t1, j].
ad::Var forward_one_step(const DeepONetModel& m, std::span<const ad::Var> branch_params,
                         std::span<const ad::Var> trunk_params, ad::Var y0_norm, ad::Var t);
Tensor forward_one_step(const DeepONetModel& m, const Tensor& y0_norm);

// Two-step prediction B . Q* in normalized space. Throws ConfigError without Q*.
Tensor forward_two_step(const DeepONetModel& m, const Tensor& y0_norm);
// Same prediction through the trunk output and R*^-1: tr . R*^-1 . B^T per state.
Tensor forward_two_step_via_trunk(const DeepONetModel& m, const Tensor& y0_norm);

// Dispatches on the paradigm. Inputs [bs, j], outputs [bs, n_t1, j].
Tensor predict_normalized(const DeepONetModel& m, const Tensor& y0_norm);
Tensor predict_raw(const DeepONetModel& m, const Tensor& y0_raw);

// Autoregressive rollout from raw initial states [bs, j]: the final predicted
// state of each segment seeds the next. Shared endpoints appear once, so the
// result is [bs, segments * (n_t1 - 1) + 1, j] in physical space.
Tensor recursive_predict(const DeepONetModel& m, const Tensor& y0_raw, int num_segments);

io::Json network_config_to_json(const nn::NetworkConfig& cfg);
nn::NetworkConfig network_config_from_json(const io::Json& j);

void save_checkpoint(const DeepONetModel& m, const std::filesystem::path& dir);
DeepONetModel load_checkpoint(const std::filesystem::path& dir);

}  // namespace amore
