#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "amore/dataset.hpp"
#include "amore/deeponet.hpp"
#include "amore/evaluation.hpp"
#include "amore/io.hpp"
#include "amore/trainer.hpp"

namespace amore::exp {

struct NetworkSpec {
    std::string family = "resnet";  // resnet | kan
    std::size_t width = 32;         // resnet
    std::size_t layers = 4;         // resnet, even
    std::string activation = "tanh";
    std::vector<std::size_t> hidden{16};  // kan hidden node counts
    std::size_t order = 3;
    double alpha = 1.0, beta = 1.0;
};

// Everything a gen/train/eval invocation needs. Parsed from JSON, where every
// key is optional and unknown keys are rejected.
struct ExperimentConfig {
    // data
    std::string mechanism = "rober";
    io::Json mechanism_params;  // null for defaults
    std::string grid = "11x11";
    std::size_t steps = 990;
    double dt = 1e-3;
    std::uint64_t data_seed = 7;
    double train_fraction = 0.8;
    bool origin_shift = true;
    std::size_t segment_length = 100;
    // model
    NetworkSpec branch;
    NetworkSpec trunk{"kan"};
    std::size_t p = 16;
    Paradigm paradigm = Paradigm::OneStep;
    loss::Kind loss = loss::Kind::TypeB;
    bool com = false;
    double com_multiplier = 0.1;
    // Unset means on (1.05) for one-step and off for two-step.
    std::optional<bool> pou;
    std::optional<double> bound;  // 0 disables
    bool mass_map = false;
    // training
    int epochs = 3000;
    std::size_t minibatches = 8;
    int switch_epoch = -1;
    std::size_t minibatches_after = 0;
    double lr = 1e-3;
    double lr_half_life = 2000.0;
    int eval_every = 50;
    int update_first_epoch = 100;
    int update_every = 50;
    bool least_squares_coefficients = true;
    std::uint64_t seed = 1;
    std::size_t runs = 1;

    // Cross-field rules; throws ConfigError.
    void validate() const;
    io::Json to_json() const;
    static ExperimentConfig from_json(const io::Json& j);

    bool pou_enabled() const { return pou.value_or(paradigm == Paradigm::OneStep); }
    double bound_value() const { return bound.value_or(paradigm == Paradigm::OneStep ? 1.05 : 0.0); }
    GenerationSpec generation() const;
    TrainConfig training(std::uint64_t run_seed) const;
    std::uint64_t run_seed(std::size_t run) const { return seed + run; }
};

std::string to_string(Paradigm p);
std::string to_string(loss::Kind k);
Paradigm paradigm_from_string(const std::string& s);
loss::Kind loss_kind_from_string(const std::string& s);

// Human-readable list of differences, empty when equal.
std::string schema_diff(const StateSchema& expected, const StateSchema& actual);

// The dataset the network actually sees: collapsed coordinates with their own
// normalization (fit on the training split) when the mass map is on.
TrajectoryDataset model_view(const TrajectoryDataset& ds, bool mass_map);

// Model plus the coordinate map back to the dataset's physical states.
struct Surrogate {
    DeepONetModel model;
    bool mass_map = false;
    StateSchema physical;

    // Raw physical initial states [bs, j] -> [bs, n_t1, j].
    Tensor predict(const Tensor& y0) const;
    // Autoregressive rollout in physical space, [bs, segments*(n_t1-1)+1, j].
    Tensor rollout(const Tensor& y0, int segments) const;
};

void save_surrogate(const Surrogate& s, const std::filesystem::path& dir);
Surrogate load_surrogate(const std::filesystem::path& dir);

// Physical-space reports on trajectories `idx` of a dataset.
struct SplitReport {
    eval::ErrorReport segmented;
    eval::ErrorReport reconstructed;
};
SplitReport evaluate_split(const Surrogate& s, const TrajectoryDataset& ds,
                           const std::vector<std::size_t>& idx, std::size_t seg_len);

// Full-horizon rollout from row 0 of trajectories `idx`, truncated to `segments`.
eval::AccumulationCurves evaluate_rollout(const Surrogate& s, const TrajectoryDataset& ds,
                                          const std::vector<std::size_t>& idx, int segments);

struct RunOutcome {
    std::uint64_t seed = 0;
    Surrogate surrogate;
    TrainResult result;       // branch phase for two-step
    TrainResult trunk_result;  // two-step only
    std::optional<SplitReport> test;  // empty without a test split
    double final_train_rel_l2 = 0.0;  // as logged by the trainer
};

// One training run. With a nonempty run_dir, history and weight CSVs stream
// there (so a diverged run keeps its partial history) and the checkpoint is
// written at the end.
RunOutcome train_run(const ExperimentConfig& cfg, const TrajectoryDataset& ds, std::uint64_t seed,
                     const std::filesystem::path& run_dir = {});

}  // namespace amore::exp
