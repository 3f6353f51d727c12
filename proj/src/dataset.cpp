#include "amore/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "amore/error.hpp"
#include "amore/rng.hpp"

namespace amore {

namespace fs = std::filesystem;

Tensor TrajectoryDataset::select(const std::vector<std::size_t>& idx) const {
    const std::size_t n = num_rows(), j = raw.dim(2), stride = n * j;
    Tensor out({idx.size(), n, j});
    for (std::size_t r = 0; r < idx.size(); ++r) {
        if (idx[r] >= num_trajectories()) throw DimensionError("dataset: trajectory index out of range");
        std::copy_n(raw.data().begin() + idx[r] * stride, stride, out.data().begin() + r * stride);
    }
    return out;
}

std::pair<std::size_t, std::size_t> parse_grid(const std::string& spec) {
    std::size_t a = 0, b = 1;
    char x = 0, extra = 0;
    const int got = std::sscanf(spec.c_str(), "%zu%c%zu%c", &a, &x, &b, &extra);
    const bool ok = (got == 1) || (got == 3 && x == 'x');
    if (!ok || a == 0 || b == 0 || spec.find('-') != std::string::npos) {
        throw ConfigError("invalid grid '" + spec + "' (expected e.g. 11x11)");
    }
    return {a, b};
}

namespace {

double grid_coord(std::size_t i, std::size_t n) {
    return n == 1 ? 0.0 : double(i) / double(n - 1);
}

}  // namespace

TrajectoryDataset generate_dataset(const kin::Mechanism& mech, const GenerationSpec& spec) {
    if (spec.grid1 == 0 || spec.grid2 == 0) throw ConfigError("generate: empty IC grid");
    if (spec.steps == 0) throw ConfigError("generate: steps must be positive");
    if (!(spec.train_fraction > 0.0 && spec.train_fraction <= 1.0)) {
        throw ConfigError("generate: train fraction must be in (0, 1]");
    }
    const std::size_t bs = spec.grid1 * spec.grid2, j = mech.dim();
    const std::size_t shift = spec.origin_shift ? 1 : 0;
    const std::size_t rows = spec.steps + 1;
    TrajectoryDataset ds;
    ds.raw = Tensor({bs, rows, j});
    ds.dt = spec.dt;
    ds.t0 = double(shift) * spec.dt;
    ds.schema = mech.schema();
    for (std::size_t i1 = 0; i1 < spec.grid1; ++i1)
        for (std::size_t i2 = 0; i2 < spec.grid2; ++i2) {
            const std::size_t b = i1 * spec.grid2 + i2;
            const auto y0 = mech.initial_state(grid_coord(i1, spec.grid1), grid_coord(i2, spec.grid2));
            Tensor traj;
            try {
                traj = kin::integrate(mech, y0, spec.dt, spec.steps + shift, spec.integrator);
            } catch (const IntegrationError& e) {
                std::ostringstream os;
                os << "generate: initial state " << b << " (";
                for (std::size_t a = 0; a < j; ++a) os << (a ? ", " : "") << y0[a];
                os << ") failed: " << e.what();
                throw IntegrationError(os.str(), e.time_index());
            }
            // Burnt-out species sit at roundoff level (possibly just below zero);
            // integrated rows are floored so the log transform stays defined.
            for (std::size_t i = 1; i < traj.dim(0); ++i)
                for (std::size_t a = 0; a < j; ++a)
                    if (ds.schema.log_transform[a]) traj.at(i, a) = std::max(traj.at(i, a), spec.log_floor);
            std::copy(traj.data().begin() + shift * j, traj.data().end(),
                      ds.raw.data().begin() + b * rows * j);
        }

    Rng rng = Rng::stream(spec.seed, "split");
    const auto perm = rng.permutation(bs);
    const auto n_test =
        static_cast<std::size_t>(std::llround(double(bs) * (1.0 - spec.train_fraction)));
    ds.test.assign(perm.begin(), perm.begin() + n_test);
    ds.train.assign(perm.begin() + n_test, perm.end());
    std::sort(ds.test.begin(), ds.test.end());
    std::sort(ds.train.begin(), ds.train.end());
    try {
        ds.norm = fit_normalization(ds.select(ds.train), ds.schema);
    } catch (const DomainError& e) {
        throw ConfigError(std::string("generate: ") + e.what() +
                          "; log-transformed states must stay positive (keep the origin shift on)");
    }

    ds.mechanism = mech.describe();
    ds.generation = {{"grid", {spec.grid1, spec.grid2}},
                     {"dt", spec.dt},
                     {"steps", spec.steps},
                     {"seed", spec.seed},
                     {"train_fraction", spec.train_fraction},
                     {"origin_shift", spec.origin_shift},
                     {"log_floor", spec.log_floor},
                     {"rtol", spec.integrator.rtol},
                     {"atol", spec.integrator.atol}};
    return ds;
}

SegmentedDataset time_decompose(const Tensor& trajectories, std::size_t seg_len,
                                const std::vector<std::size_t>& source_ids) {
    require_rank(trajectories, 3, "time_decompose trajectories");
    const std::size_t bs = trajectories.dim(0), n = trajectories.dim(1), j = trajectories.dim(2);
    if (seg_len < 2) throw ConfigError("time_decompose: segments need at least two points");
    const std::size_t step = seg_len - 1;
    if ((n - 1) % step != 0 || n < seg_len) {
        const std::size_t lo = std::max<std::size_t>(1, (n - 1) / step) * step + 1;
        throw ConfigError("time_decompose: " + std::to_string(n) + " rows cannot be cut into " +
                          std::to_string(seg_len) + "-point segments; nearest valid row count is " +
                          std::to_string(lo) + " (or " + std::to_string(lo + step) + ")");
    }
    if (!source_ids.empty() && source_ids.size() != bs) {
        throw DimensionError("time_decompose: one source id per trajectory required");
    }
    SegmentedDataset out;
    out.seg_len = seg_len;
    out.segments_per_trajectory = (n - 1) / step;
    const std::size_t total = bs * out.segments_per_trajectory;
    out.segments = Tensor({total, seg_len, j});
    out.branch_inputs = Tensor({total, j});
    std::size_t s = 0;
    for (std::size_t b = 0; b < bs; ++b)
        for (std::size_t k = 0; k < out.segments_per_trajectory; ++k, ++s) {
            const auto src = trajectories.data().begin() + (b * n + k * step) * j;
            std::copy_n(src, seg_len * j, out.segments.data().begin() + s * seg_len * j);
            std::copy_n(src, j, out.branch_inputs.data().begin() + s * j);
            out.trajectory.push_back(source_ids.empty() ? b : source_ids[b]);
        }
    return out;
}

Tensor flatten_segments(const Tensor& segments, std::size_t per_traj) {
    require_rank(segments, 3, "flatten_segments");
    if (per_traj == 0 || segments.dim(0) % per_traj != 0) {
        throw DimensionError("flatten_segments: segment count not a multiple of segments per trajectory");
    }
    return segments.reshaped({segments.dim(0) / per_traj, per_traj * segments.dim(1), segments.dim(2)});
}

Tensor reassemble_segments(const Tensor& segments, std::size_t per_traj) {
    require_rank(segments, 3, "reassemble_segments");
    if (per_traj == 0 || segments.dim(0) % per_traj != 0) {
        throw DimensionError("reassemble_segments: segment count not a multiple of segments per trajectory");
    }
    const std::size_t bs = segments.dim(0) / per_traj, len = segments.dim(1), j = segments.dim(2);
    const std::size_t n = per_traj * (len - 1) + 1;
    Tensor out({bs, n, j});
    for (std::size_t b = 0; b < bs; ++b)
        for (std::size_t k = 0; k < per_traj; ++k) {
            const std::size_t first = k == 0 ? 0 : 1;
            for (std::size_t i = first; i < len; ++i)
                for (std::size_t a = 0; a < j; ++a)
                    out.at(b, k * (len - 1) + i, a) = segments.at(b * per_traj + k, i, a);
        }
    return out;
}

std::string config_hash(const io::Json& j) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : j.dump()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void save_dataset(const TrajectoryDataset& ds, const fs::path& dir) {
    fs::create_directories(dir);
    io::Json man;
    man["format"] = "amore-dataset-1";
    man["dt"] = ds.dt;
    man["t0"] = ds.t0;
    man["rows"] = ds.num_rows();
    man["states"] = ds.schema.size();
    man["schema"] = io::to_json(ds.schema);
    man["normalization"] = io::to_json(ds.norm);
    man["mechanism"] = ds.mechanism;
    man["mechanism_hash"] = config_hash(ds.mechanism);
    man["generation"] = ds.generation;
    man["splits"] = {{"train", {{"file", "train.f64"}, {"trajectories", ds.train}}},
                     {"test", {{"file", "test.f64"}, {"trajectories", ds.test}}}};
    io::write_blob(dir / "train.f64", ds.select(ds.train).buffer());
    io::write_blob(dir / "test.f64", ds.select(ds.test).buffer());
    io::write_json(dir / "manifest.json", man);
}

TrajectoryDataset load_dataset(const fs::path& dir) {
    if (!fs::exists(dir / "manifest.json")) throw IoError("no dataset manifest in " + dir.string());
    const io::Json man = io::read_json(dir / "manifest.json");
    TrajectoryDataset ds;
    try {
        if (man.at("format") != "amore-dataset-1") throw ConfigError("unknown dataset format");
        ds.dt = man.at("dt").get<double>();
        ds.t0 = man.at("t0").get<double>();
        ds.schema = io::schema_from_json(man.at("schema"));
        ds.norm = io::normalization_from_json(man.at("normalization"));
        ds.mechanism = man.at("mechanism");
        ds.generation = man.at("generation");
        const auto rows = man.at("rows").get<std::size_t>();
        const auto j = man.at("states").get<std::size_t>();
        ds.train = man.at("splits").at("train").at("trajectories").get<std::vector<std::size_t>>();
        ds.test = man.at("splits").at("test").at("trajectories").get<std::vector<std::size_t>>();
        const std::size_t bs = ds.train.size() + ds.test.size();
        ds.raw = Tensor({bs, rows, j});
        const std::size_t stride = rows * j;
        for (const char* split : {"train", "test"}) {
            const auto& ids = std::string(split) == "train" ? ds.train : ds.test;
            const auto file = man["splits"][split]["file"].get<std::string>();
            const auto data = io::read_blob(dir / file, ids.size() * stride);
            for (std::size_t r = 0; r < ids.size(); ++r) {
                if (ids[r] >= bs) throw IoError("dataset: split index out of range");
                std::copy_n(data.begin() + r * stride, stride, ds.raw.data().begin() + ids[r] * stride);
            }
        }
    } catch (const io::Json::exception& e) {
        throw ConfigError(std::string("dataset manifest: ") + e.what());
    }
    return ds;
}

}  // namespace amore
