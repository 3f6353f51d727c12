#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "amore/adam.hpp"
#include "amore/dataset.hpp"
#include "amore/deeponet.hpp"
#include "amore/losses.hpp"

namespace amore {

struct HistoryRow {
    int epoch = 0;           // 1-based count of completed epochs
    double loss = 0.0;       // mean minibatch loss over the epoch
    double train_rel_l2 = 0.0;
    double test_rel_l2 = 0.0;  // NaN without a test split
    double lr = 0.0;
};

struct TrainConfig {
    int epochs = 3000;
    std::size_t minibatches = 1;
    // From switch_epoch on, minibatches_after chunks are used (disabled when < 0).
    int switch_epoch = -1;
    std::size_t minibatches_after = 0;
    std::uint64_t seed = 0;
    loss::LossConfig loss;
    ad::AdamConfig adam;
    int eval_every = 50;
    // Two-step: branch targets from least-squares coefficients (true) or from
    // the optimized trunk coefficients (false).
    bool least_squares_coefficients = true;
    // Trunk phase only: optimize the coefficient tensor with the trunk frozen.
    bool freeze_trunk = false;
    // Called after every logged evaluation, e.g. to stream history to disk.
    std::function<void(const HistoryRow&)> on_eval;

    std::size_t minibatches_at(int epoch) const;
    void validate(std::size_t num_samples) const;
};

// Segments in the model's state space: normalized inputs/targets for the
// optimizer and raw targets for physical-space errors.
struct TrainingData {
    Tensor y0_norm;  // [N, j]
    Tensor y_norm;   // [N, n_t1, j]
    Tensor y_raw;    // [N, n_t1, j]

    std::size_t size() const { return y_raw.dim(0); }
};

TrainingData make_training_data(const SegmentedDataset& seg, const StateSchema& schema,
                                const NormalizationParams& norm);

struct WeightSnapshot {
    int epoch = 0;  // 0-based epoch the weights take effect in
    Tensor values;
    double budget = 0.0;
};

struct TrainResult {
    std::vector<HistoryRow> history;
    std::vector<WeightSnapshot> weights;
};

// Mean over (sample, state) of the physical-space relative L2 of the model's predictions.
double mean_relative_l2(const DeepONetModel& m, const TrainingData& data);

// Joint branch/trunk training. Throws TrainingDivergedError on a non-finite loss.
TrainResult train_one_step(DeepONetModel& m, const TrainingData& train, const TrainingData* test,
                           const TrainConfig& cfg);

struct TrunkResult {
    TrainResult log;
    Tensor a;  // optimized coefficients [j, p, N]
};

// Fits trunk parameters and a free coefficient tensor A so that
// contract_trunk_A(trunk(t), A) reproduces the normalized training targets.
TrunkResult train_trunk(DeepONetModel& m, const TrainingData& train, const TrainConfig& cfg);

struct TwoStepArtifacts {
    Tensor q_star;  // [j, n_t1, p]
    Tensor r_star;  // [j, p, p]
    Tensor a_star;  // [j, p, N]
    Tensor u;       // [N, j, p] branch targets R* A*
};

// Per-state thin QR of the trained trunk. A* is the least-squares fit of the
// targets (or `a_opt` when given). Stores Q*, R* in the model. Throws
// SingularBasisError naming the state on rank deficiency.
TwoStepArtifacts factorize_trunk(DeepONetModel& m, const TrainingData& train,
                                 const Tensor* a_opt = nullptr);

// The same factorization for an explicit basis [n_t1, j, p] and normalized
// targets [N, n_t1, j]; `names` label the states in error messages.
TwoStepArtifacts factorize_basis(const Tensor& basis, const Tensor& y_norm,
                                 const std::vector<std::string>& names,
                                 const Tensor* a_opt = nullptr);

// Fits the branch to the targets U; predictions go through Q*.
TrainResult train_branch(DeepONetModel& m, const TwoStepArtifacts& art, const TrainingData& train,
                         const TrainingData* test, const TrainConfig& cfg);

void write_history_csv(const std::filesystem::path& path, const TrainResult& r);
void write_weights_csv(const std::filesystem::path& path, const TrainResult& r);

}  // namespace amore
