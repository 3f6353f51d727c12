#include "amore/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>

#include "amore/dataset.hpp"
#include "amore/error.hpp"
#include "amore/losses.hpp"

namespace amore::eval {

double relative_l2(std::span<const double> y, std::span<const double> y_hat) {
    if (y.size() != y_hat.size()) {
        throw DimensionError("relative_l2: lengths " + std::to_string(y.size()) + " and " +
                             std::to_string(y_hat.size()));
    }
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        num += (y[i] - y_hat[i]) * (y[i] - y_hat[i]);
        den += y[i] * y[i];
    }
    if (den <= 0.0) throw UndefinedMetricError("relative L2 undefined for a zero reference");
    return std::sqrt(num / den);
}

double percentile(std::vector<double> values, double q) {
    if (values.empty()) throw ValidationError("percentile of an empty set");
    if (!(q >= 0.0 && q <= 1.0)) throw ValidationError("percentile rank outside [0, 1]");
    std::sort(values.begin(), values.end());
    const double pos = q * double(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - double(lo)) * (values[hi] - values[lo]);
}

ErrorReport summarize(const Tensor& errors, const std::vector<std::string>& names) {
    require_rank(errors, 2, "summarize");
    const std::size_t n = errors.dim(0), j = errors.dim(1);
    if (names.size() != j) throw DimensionError("summarize: one name per state required");
    if (n == 0) throw ValidationError("summarize: no samples");
    ErrorReport r;
    r.names = names;
    r.errors = errors;
    for (std::size_t a = 0; a < j; ++a) {
        std::vector<double> col(n);
        for (std::size_t b = 0; b < n; ++b) col[b] = errors.at(b, a);
        StateStats s;
        for (double v : col) s.mean += v;
        s.mean /= double(n);
        for (double v : col) s.std += (v - s.mean) * (v - s.mean);
        s.std = std::sqrt(s.std / double(n));
        s.median = percentile(col, 0.5);
        s.q75 = percentile(col, 0.75);
        s.q90 = percentile(col, 0.9);
        s.max = *std::max_element(col.begin(), col.end());
        r.global_mean += s.mean;
        r.states.push_back(s);
    }
    r.global_mean /= double(j);
    return r;
}

ErrorReport report(const Tensor& truth, const Tensor& pred, const StateSchema& schema, Mode mode,
                   std::size_t segments_per_trajectory) {
    require_rank(truth, 3, "report truth");
    if (truth.shape() != pred.shape()) {
        throw DimensionError("report: truth " + shape_str(truth.shape()) + " vs prediction " +
                             shape_str(pred.shape()));
    }
    if (truth.dim(2) != schema.size()) throw DimensionError("report: state count differs from schema");
    if (mode == Mode::Segmented) return summarize(loss::relative_errors(truth, pred), schema.names);
    return summarize(loss::relative_errors(flatten_segments(truth, segments_per_trajectory),
                                           flatten_segments(pred, segments_per_trajectory)),
                     schema.names);
}

namespace {

Tensor leading_rows(const Tensor& t, std::size_t rows) {
    const std::size_t bs = t.dim(0), n = t.dim(1), j = t.dim(2);
    Tensor out({bs, rows, j});
    for (std::size_t b = 0; b < bs; ++b)
        std::copy_n(t.data().begin() + b * n * j, rows * j, out.data().begin() + b * rows * j);
    return out;
}

}  // namespace

AccumulationCurves accumulation_from_rollout(const Tensor& truth, const Tensor& rollout,
                                             std::size_t n_t1, const StateSchema& schema) {
    require_rank(truth, 3, "accumulation truth");
    if (truth.shape() != rollout.shape()) {
        throw DimensionError("accumulation: truth " + shape_str(truth.shape()) + " vs rollout " +
                             shape_str(rollout.shape()));
    }
    if (n_t1 < 2 || (truth.dim(1) - 1) % (n_t1 - 1) != 0) {
        throw DimensionError("accumulation: series length is not a whole number of segments");
    }
    const std::size_t segs = (truth.dim(1) - 1) / (n_t1 - 1), j = truth.dim(2);
    AccumulationCurves c;
    c.names = schema.names;
    c.mean = Tensor({segs, j});
    c.median = Tensor({segs, j});
    c.q75 = Tensor({segs, j});
    c.q90 = Tensor({segs, j});
    for (std::size_t s = 1; s <= segs; ++s) {
        const std::size_t rows = s * (n_t1 - 1) + 1;
        ErrorReport r = summarize(
            loss::relative_errors(leading_rows(truth, rows), leading_rows(rollout, rows)), schema.names);
        for (std::size_t a = 0; a < j; ++a) {
            c.mean.at(s - 1, a) = r.states[a].mean;
            c.median.at(s - 1, a) = r.states[a].median;
            c.q75.at(s - 1, a) = r.states[a].q75;
            c.q90.at(s - 1, a) = r.states[a].q90;
        }
        c.steps.push_back(std::move(r));
    }
    return c;
}

AccumulationCurves error_accumulation(const DeepONetModel& m, const Tensor& trajectories) {
    require_rank(trajectories, 3, "error_accumulation");
    const std::size_t nt = m.num_times(), bs = trajectories.dim(0), j = trajectories.dim(2);
    if ((trajectories.dim(1) - 1) % (nt - 1) != 0) {
        throw ConfigError("error_accumulation: " + std::to_string(trajectories.dim(1)) +
                          " rows are not a whole number of " + std::to_string(nt) + "-point segments");
    }
    Tensor y0({bs, j});
    for (std::size_t b = 0; b < bs; ++b)
        for (std::size_t a = 0; a < j; ++a) y0.at(b, a) = trajectories.at(b, 0, a);
    const int segs = static_cast<int>((trajectories.dim(1) - 1) / (nt - 1));
    return accumulation_from_rollout(trajectories, recursive_predict(m, y0, segs), nt, m.schema);
}

namespace {

std::ofstream open_csv(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string());
    out << std::setprecision(17);
    return out;
}

}  // namespace

void write_errors_csv(const std::filesystem::path& path, const ErrorReport& r) {
    auto out = open_csv(path);
    out << "sample,state,rel_l2\n";
    for (std::size_t b = 0; b < r.errors.dim(0); ++b)
        for (std::size_t a = 0; a < r.names.size(); ++a)
            out << b << ',' << r.names[a] << ',' << r.errors.at(b, a) << '\n';
}

void write_summary_csv(const std::filesystem::path& path, const ErrorReport& r) {
    auto out = open_csv(path);
    out << "state,mean,std,median,q75,q90,max\n";
    for (std::size_t a = 0; a < r.names.size(); ++a) {
        const auto& s = r.states[a];
        out << r.names[a] << ',' << s.mean << ',' << s.std << ',' << s.median << ',' << s.q75 << ','
            << s.q90 << ',' << s.max << '\n';
    }
    out << "all," << r.global_mean << ",,,,,\n";
}

void write_accumulation_csv(const std::filesystem::path& path, const AccumulationCurves& c) {
    auto out = open_csv(path);
    out << "segments,state,mean,median,q75,q90\n";
    for (std::size_t s = 0; s < c.num_segments(); ++s)
        for (std::size_t a = 0; a < c.names.size(); ++a)
            out << s + 1 << ',' << c.names[a] << ',' << c.mean.at(s, a) << ',' << c.median.at(s, a)
                << ',' << c.q75.at(s, a) << ',' << c.q90.at(s, a) << '\n';
}

}  // namespace amore::eval
