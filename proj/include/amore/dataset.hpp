#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "amore/io.hpp"
#include "amore/kinetics.hpp"
#include "amore/schema.hpp"
#include "amore/tensor.hpp"

namespace amore {

// Full trajectories on a uniform grid, [bs, n_rows, j], plus the train/test split.
struct TrajectoryDataset {
    Tensor raw;
    double dt = 0.0;
    // Physical time of row 0 (dt when the t = 0 row was dropped).
    double t0 = 0.0;
    StateSchema schema;
    NormalizationParams norm;  // fit on the training split
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
    io::Json mechanism;  // describe() of the generating mechanism
    io::Json generation;  // grid, steps, seed, integrator tolerances

    std::size_t num_trajectories() const { return raw.dim(0); }
    std::size_t num_rows() const { return raw.dim(1); }
    // Trajectories `idx` as a [idx.size(), n_rows, j] tensor.
    Tensor select(const std::vector<std::size_t>& idx) const;
};

struct GenerationSpec {
    std::size_t grid1 = 11, grid2 = 11;
    double dt = 1e-3;
    std::size_t steps = 990;  // intervals kept in each stored series
    std::uint64_t seed = 7;
    double train_fraction = 0.8;
    // Integrate one extra interval from t = 0 and drop the t = 0 row, so every
    // stored value is strictly positive under the log transform.
    bool origin_shift = true;
    // Lower bound on integrated values of log-transformed states.
    double log_floor = 1e-20;
    kin::IntegratorOptions integrator;
};

// Parses "11x11" (or "11" for a single axis). Throws ConfigError on bad input.
std::pair<std::size_t, std::size_t> parse_grid(const std::string& spec);

// Integrates the Cartesian grid of initial states u1 = linspace(0,1,grid1),
// u2 = linspace(0,1,grid2) (a single point sits at 0) and splits trajectories
// by a seeded permutation. Integration failures abort with the failing state.
TrajectoryDataset generate_dataset(const kin::Mechanism& mech, const GenerationSpec& spec);

// Overlapping segments of seg_len rows: segment s covers rows
// s*(seg_len-1) .. (s+1)*(seg_len-1), so consecutive segments share an endpoint.
struct SegmentedDataset {
    Tensor segments;       // [N, seg_len, j], trajectory-major
    Tensor branch_inputs;  // [N, j], first row of each segment
    std::size_t seg_len = 0;
    std::size_t segments_per_trajectory = 0;
    std::vector<std::size_t> trajectory;  // source trajectory of each segment

    std::size_t size() const { return segments.dim(0); }
};

// Throws ConfigError (with the nearest valid row count) unless
// n_rows - 1 is a multiple of seg_len - 1.
SegmentedDataset time_decompose(const Tensor& trajectories, std::size_t seg_len,
                                const std::vector<std::size_t>& source_ids = {});

// Concatenates each trajectory's segments back into [bs, n_seg*seg_len, j],
// keeping the duplicated shared endpoints.
Tensor flatten_segments(const Tensor& segments, std::size_t segments_per_trajectory);

// Removes the duplicated endpoints: the exact inverse of time_decompose.
Tensor reassemble_segments(const Tensor& segments, std::size_t segments_per_trajectory);

void save_dataset(const TrajectoryDataset& ds, const std::filesystem::path& dir);
TrajectoryDataset load_dataset(const std::filesystem::path& dir);

// FNV-1a hash of a JSON document's compact dump, hex encoded.
std::string config_hash(const io::Json& j);

}  // namespace amore
