#pragma once

#include <vector>

#include "amore/autodiff.hpp"
#include "amore/schema.hpp"
#include "amore/tensor.hpp"

namespace amore::loss {

enum class Kind { NonAdaptive, TypeA, TypeB };

struct LossConfig {
    Kind kind = Kind::NonAdaptive;
    bool com = false;
    double com_multiplier = 0.1;
    // Adaptive weight updates happen at the start of epochs first, first+every, ...
    int update_first_epoch = 100;
    int update_every = 50;
};

// Gradient-free per-state (Type-A, [j]) or per-sample-per-state (Type-B, [bs, j])
// weights. Values always sum to the budget: j for Type-A, j * bs for Type-B.
class AdaptiveWeights {
  public:
    AdaptiveWeights(Kind kind, std::size_t num_samples, std::size_t num_states);

    Kind kind() const noexcept { return kind_; }
    const Tensor& values() const noexcept { return values_; }
    double budget() const noexcept { return budget_; }
    bool is_update_epoch(int epoch, const LossConfig& cfg) const;

    // W = X / sum(X) * R from a relative-error matrix X [bs, j]; Type-A first
    // averages X over samples. Throws ValidationError if every error is zero.
    void update(const Tensor& rel_errors);

    // Rows of a Type-B weight matrix for the given samples; Type-A values as is.
    Tensor select(const std::vector<std::size_t>& samples) const;

  private:
    Kind kind_;
    Tensor values_;
    double budget_;
};

// Relative L2 over the time axis for each (sample, state) of [bs, n_t1, j] -> [bs, j].
Tensor relative_errors(const Tensor& truth, const Tensor& pred);

// (1 / numel) * sum (Y - Yhat)^2.
ad::Var mse_data_loss(ad::Var pred, const Tensor& target);

// (1 / (bs n_t1)) * sum_{b,c} (sum_{a in mass_group} Yhat_raw[b,c,a] - 1)^2.
ad::Var com_loss(ad::Var pred_raw, const StateSchema& schema);

// sum_a W_a * mean over (bs, n_t1) of the squared error of state a. `state_axis`
// selects which axis of pred carries the states (2 for [bs, n_t1, j] data,
// 1 for [bs, j, p] branch coefficients).
ad::Var weighted_loss_typeA(ad::Var pred, const Tensor& target, const Tensor& w,
                            std::size_t state_axis = 2);

// sum_{b,a} W_ba * mean over the remaining axis of the squared error of trajectory (b, a).
ad::Var weighted_loss_typeB(ad::Var pred, const Tensor& target, const Tensor& w,
                            std::size_t state_axis = 2);

// Data loss of the configured kind. `w` is ignored for the non-adaptive kind.
ad::Var data_loss(Kind kind, ad::Var pred, const Tensor& target, const Tensor& w,
                  std::size_t state_axis = 2);

// W_CoM: the multiplier itself, or multiplier * sum(active weights) for adaptive kinds.
double com_weight(const LossConfig& cfg, const Tensor& active_weights);

// L = L_data + W_CoM * L_CoM, or L_data alone when CoM is disabled.
ad::Var combined_loss(ad::Var data, ad::Var com, const LossConfig& cfg,
                      const Tensor& active_weights);

}  // namespace amore::loss
