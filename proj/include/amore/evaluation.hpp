#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "amore/deeponet.hpp"
#include "amore/schema.hpp"
#include "amore/tensor.hpp"

namespace amore::eval {

// ||y - y_hat||_2 / ||y||_2. Throws UndefinedMetricError when ||y|| = 0.
double relative_l2(std::span<const double> y, std::span<const double> y_hat);

// Linear interpolation between order statistics, q in [0, 1].
double percentile(std::vector<double> values, double q);

struct StateStats {
    double mean = 0.0;
    double std = 0.0;  // population standard deviation
    double median = 0.0;
    double q75 = 0.0;
    double q90 = 0.0;
    double max = 0.0;
};

struct ErrorReport {
    std::vector<std::string> names;
    Tensor errors;  // [samples, j] relative L2 over the time axis
    std::vector<StateStats> states;
    double global_mean = 0.0;  // mean of the per-state means
};

// Statistics of an error matrix [samples, j].
ErrorReport summarize(const Tensor& errors, const std::vector<std::string>& names);

enum class Mode { Segmented, Reconstructed };

// Physical-space report. Inputs are segments [N, n_t1, j]; Reconstructed mode
// first concatenates the segments of each trajectory (shared endpoints kept).
ErrorReport report(const Tensor& truth, const Tensor& pred, const StateSchema& schema, Mode mode,
                   std::size_t segments_per_trajectory = 1);

// Rollout error curves: row s-1 is computed on rows 0 .. s*(n_t1-1) of the
// deduplicated series, i.e. everything predicted up to segment s.
struct AccumulationCurves {
    std::vector<std::string> names;
    Tensor mean;    // [S, j]
    Tensor median;  // [S, j]
    Tensor q75;     // [S, j]
    Tensor q90;     // [S, j]
    std::vector<ErrorReport> steps;

    std::size_t num_segments() const { return steps.size(); }
};

AccumulationCurves accumulation_from_rollout(const Tensor& truth, const Tensor& rollout,
                                             std::size_t n_t1, const StateSchema& schema);

// Rolls the model out from the first row of each trajectory [bs, rows, j]
// over the full horizon. RolloutDivergenceError propagates with its segment.
AccumulationCurves error_accumulation(const DeepONetModel& m, const Tensor& trajectories);

// CSV headers: sample,state,rel_l2 / state,mean,std,median,q75,q90,max /
// segments,state,mean,median,q75,q90.
void write_errors_csv(const std::filesystem::path& path, const ErrorReport& r);
void write_summary_csv(const std::filesystem::path& path, const ErrorReport& r);
void write_accumulation_csv(const std::filesystem::path& path, const AccumulationCurves& c);

}  // namespace amore::eval
