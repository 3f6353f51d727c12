#include "amore/experiment.hpp"

#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "amore/error.hpp"
#include "amore/massmap.hpp"

namespace amore::exp {

namespace fs = std::filesystem;

namespace {

// Reads keys out of a JSON object and complains about anything left over.
class Reader {
  public:
    Reader(const io::Json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) throw ConfigError(where_ + ": expected a JSON object");
    }

    template <class T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key) || j_.at(key).is_null()) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const io::Json::exception& e) {
            throw ConfigError(where_ + "." + key + ": " + e.what());
        }
    }

    template <class T>
    void get(const char* key, std::optional<T>& out) {
        T v{};
        seen_.insert(key);
        if (!j_.contains(key) || j_.at(key).is_null()) return;
        get(key, v);
        out = v;
    }

    const io::Json* raw(const char* key) {
        seen_.insert(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }

    void finish() const {
        for (const auto& [k, v] : j_.items())
            if (!seen_.count(k)) throw ConfigError(where_ + ": unknown key '" + k + "'");
    }

  private:
    const io::Json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

NetworkSpec network_from_json(const io::Json& j, NetworkSpec spec, const std::string& where) {
    Reader r(j, where);
    r.get("family", spec.family);
    r.get("width", spec.width);
    r.get("layers", spec.layers);
    r.get("activation", spec.activation);
    r.get("hidden", spec.hidden);
    r.get("order", spec.order);
    r.get("alpha", spec.alpha);
    r.get("beta", spec.beta);
    r.finish();
    return spec;
}

io::Json network_to_json(const NetworkSpec& n) {
    if (n.family == "kan")
        return {{"family", n.family}, {"hidden", n.hidden}, {"order", n.order}, {"alpha", n.alpha}, {"beta", n.beta}};
    return {{"family", n.family}, {"width", n.width}, {"layers", n.layers}, {"activation", n.activation}};
}

nn::NetworkConfig build_network(const NetworkSpec& n, std::size_t in, std::size_t out) {
    if (n.family == "kan") {
        nn::KanConfig k;
        k.layer_dims = {in};
        k.layer_dims.insert(k.layer_dims.end(), n.hidden.begin(), n.hidden.end());
        k.layer_dims.push_back(out);
        k.order = n.order;
        k.alpha = n.alpha;
        k.beta = n.beta;
        return k;
    }
    nn::ResNetConfig r;
    r.input_dim = in;
    r.output_dim = out;
    r.hidden_width = n.width;
    r.num_hidden_layers = n.layers;
    r.activation = n.activation == "sin" ? nn::Activation::Sin : nn::Activation::Tanh;
    return r;
}

void check_network(const NetworkSpec& n, const std::string& where) {
    if (n.family != "resnet" && n.family != "kan")
        throw ConfigError(where + ".family must be resnet or kan, got '" + n.family + "'");
    if (n.family == "resnet") {
        if (n.activation != "tanh" && n.activation != "sin")
            throw ConfigError(where + ".activation must be tanh or sin");
        if (n.width == 0 || n.layers == 0 || n.layers % 2 != 0)
            throw ConfigError(where + ": width must be positive and layers a positive even number");
    } else {
        for (auto h : n.hidden)
            if (h == 0) throw ConfigError(where + ".hidden entries must be positive");
    }
}

Tensor first_rows(const Tensor& t, std::size_t rows) {
    const std::size_t bs = t.dim(0), n = t.dim(1), j = t.dim(2);
    Tensor out({bs, rows, j});
    for (std::size_t b = 0; b < bs; ++b)
        std::copy_n(t.data().begin() + std::ptrdiff_t(b * n * j), rows * j,
                    out.data().begin() + std::ptrdiff_t(b * rows * j));
    return out;
}

Tensor row_zero(const Tensor& t) {
    const std::size_t bs = t.dim(0), j = t.dim(2);
    Tensor out({bs, j});
    for (std::size_t b = 0; b < bs; ++b)
        for (std::size_t a = 0; a < j; ++a) out.at(b, a) = t.at(b, 0, a);
    return out;
}

// Writes history rows as they arrive, so a failed run keeps what it logged.
class HistoryStream {
  public:
    explicit HistoryStream(const fs::path& path) {
        if (path.empty()) return;
        out_.open(path, std::ios::trunc);
        if (!out_) throw IoError("cannot open " + path.string());
        out_ << "epoch,loss,train_rel_l2,test_rel_l2,lr\n" << std::setprecision(17);
        out_.flush();
    }
    std::function<void(const HistoryRow&)> callback() {
        if (!out_.is_open()) return {};
        return [this](const HistoryRow& h) {
            out_ << h.epoch << ',' << h.loss << ',' << h.train_rel_l2 << ',' << h.test_rel_l2 << ','
                 << h.lr << '\n';
            out_.flush();
        };
    }

  private:
    std::ofstream out_;
};

}  // namespace

std::string to_string(Paradigm p) { return p == Paradigm::OneStep ? "one-step" : "two-step"; }

std::string to_string(loss::Kind k) {
    switch (k) {
        case loss::Kind::NonAdaptive: return "na";
        case loss::Kind::TypeA: return "ad-a";
        case loss::Kind::TypeB: return "ad-b";
    }
    return "?";
}

Paradigm paradigm_from_string(const std::string& s) {
    if (s == "one-step") return Paradigm::OneStep;
    if (s == "two-step") return Paradigm::TwoStep;
    throw ConfigError("paradigm must be one-step or two-step, got '" + s + "'");
}

loss::Kind loss_kind_from_string(const std::string& s) {
    if (s == "na") return loss::Kind::NonAdaptive;
    if (s == "ad-a") return loss::Kind::TypeA;
    if (s == "ad-b") return loss::Kind::TypeB;
    throw ConfigError("loss must be na, ad-a or ad-b, got '" + s + "'");
}

void ExperimentConfig::validate() const {
    parse_grid(grid);
    kin::make_mechanism(mechanism, mechanism_params);
    check_network(branch, "branch");
    check_network(trunk, "trunk");
    if (steps == 0 || !(dt > 0.0)) throw ConfigError("steps must be positive and dt > 0");
    if (!(train_fraction > 0.0 && train_fraction <= 1.0)) throw ConfigError("train_fraction must lie in (0, 1]");
    if (segment_length < 2) throw ConfigError("segment_length must be at least 2");
    if (steps % (segment_length - 1) != 0) {
        throw ConfigError("steps (" + std::to_string(steps) + ") must be a multiple of segment_length - 1 (" +
                          std::to_string(segment_length - 1) + ")");
    }
    if (p == 0) throw ConfigError("p must be positive");
    if (epochs < 1 || eval_every < 1) throw ConfigError("epochs and eval_every must be positive");
    if (minibatches == 0) throw ConfigError("minibatches must be positive");
    if (runs == 0) throw ConfigError("runs must be positive");
    if (!(lr >= 0.0)) throw ConfigError("lr must be nonnegative");
    if (bound_value() < 0.0) throw ConfigError("bound must be nonnegative");
    if (paradigm == Paradigm::TwoStep) {
        if (pou_enabled()) throw ConfigError("two-step training does not support pou");
        if (com) throw ConfigError("two-step training does not support com");
        if (bound_value() > 0.0) throw ConfigError("two-step training does not support bound");
    }
    if (mass_map && kin::make_mechanism(mechanism, mechanism_params)->schema().mass_group.empty())
        throw ConfigError("mass_map needs a mechanism with a nonempty mass group");
}

io::Json ExperimentConfig::to_json() const {
    io::Json j;
    j["mechanism"] = mechanism;
    j["mechanism_params"] = mechanism_params;
    j["grid"] = grid;
    j["steps"] = steps;
    j["dt"] = dt;
    j["data_seed"] = data_seed;
    j["train_fraction"] = train_fraction;
    j["origin_shift"] = origin_shift;
    j["segment_length"] = segment_length;
    j["branch"] = network_to_json(branch);
    j["trunk"] = network_to_json(trunk);
    j["p"] = p;
    j["paradigm"] = to_string(paradigm);
    j["loss"] = to_string(loss);
    j["com"] = com;
    j["com_multiplier"] = com_multiplier;
    j["pou"] = pou_enabled();
    j["bound"] = bound_value();
    j["mass_map"] = mass_map;
    j["epochs"] = epochs;
    j["minibatches"] = minibatches;
    j["switch_epoch"] = switch_epoch;
    j["minibatches_after"] = minibatches_after;
    j["lr"] = lr;
    j["lr_half_life"] = lr_half_life;
    j["eval_every"] = eval_every;
    j["update_first_epoch"] = update_first_epoch;
    j["update_every"] = update_every;
    j["least_squares_coefficients"] = least_squares_coefficients;
    j["seed"] = seed;
    j["runs"] = runs;
    return j;
}

ExperimentConfig ExperimentConfig::from_json(const io::Json& j) {
    ExperimentConfig c;
    Reader r(j, "config");
    r.get("mechanism", c.mechanism);
    if (auto* mp = r.raw("mechanism_params")) c.mechanism_params = *mp;
    r.get("grid", c.grid);
    r.get("steps", c.steps);
    r.get("dt", c.dt);
    r.get("data_seed", c.data_seed);
    r.get("train_fraction", c.train_fraction);
    r.get("origin_shift", c.origin_shift);
    r.get("segment_length", c.segment_length);
    if (auto* b = r.raw("branch"); b && !b->is_null()) c.branch = network_from_json(*b, c.branch, "branch");
    if (auto* t = r.raw("trunk"); t && !t->is_null()) c.trunk = network_from_json(*t, c.trunk, "trunk");
    r.get("p", c.p);
    std::string s;
    r.get("paradigm", s);
    if (!s.empty()) c.paradigm = paradigm_from_string(s);
    s.clear();
    r.get("loss", s);
    if (!s.empty()) c.loss = loss_kind_from_string(s);
    r.get("com", c.com);
    r.get("com_multiplier", c.com_multiplier);
    r.get("pou", c.pou);
    r.get("bound", c.bound);
    r.get("mass_map", c.mass_map);
    r.get("epochs", c.epochs);
    r.get("minibatches", c.minibatches);
    r.get("switch_epoch", c.switch_epoch);
    r.get("minibatches_after", c.minibatches_after);
    r.get("lr", c.lr);
    r.get("lr_half_life", c.lr_half_life);
    r.get("eval_every", c.eval_every);
    r.get("update_first_epoch", c.update_first_epoch);
    r.get("update_every", c.update_every);
    r.get("least_squares_coefficients", c.least_squares_coefficients);
    r.get("seed", c.seed);
    r.get("runs", c.runs);
    r.finish();
    c.validate();
    return c;
}

GenerationSpec ExperimentConfig::generation() const {
    GenerationSpec g;
    std::tie(g.grid1, g.grid2) = parse_grid(grid);
    g.steps = steps;
    g.dt = dt;
    g.seed = data_seed;
    g.train_fraction = train_fraction;
    g.origin_shift = origin_shift;
    return g;
}

TrainConfig ExperimentConfig::training(std::uint64_t run_seed) const {
    TrainConfig t;
    t.epochs = epochs;
    t.minibatches = minibatches;
    t.switch_epoch = switch_epoch;
    t.minibatches_after = minibatches_after;
    t.seed = run_seed;
    t.loss.kind = loss;
    t.loss.com = com;
    t.loss.com_multiplier = com_multiplier;
    t.loss.update_first_epoch = update_first_epoch;
    t.loss.update_every = update_every;
    t.adam.schedule.initial = lr;
    t.adam.schedule.half_life_epochs = lr_half_life;
    t.eval_every = eval_every;
    t.least_squares_coefficients = least_squares_coefficients;
    return t;
}

std::string schema_diff(const StateSchema& expected, const StateSchema& actual) {
    std::ostringstream out;
    auto list = [](const auto& v) {
        std::ostringstream s;
        s << '[';
        for (std::size_t i = 0; i < v.size(); ++i) s << (i ? ", " : "") << v[i];
        s << ']';
        return s.str();
    };
    if (expected.names != actual.names)
        out << "  names: expected " << list(expected.names) << ", got " << list(actual.names) << '\n';
    if (expected.log_transform != actual.log_transform)
        out << "  log_transform: expected " << list(expected.log_transform) << ", got "
            << list(actual.log_transform) << '\n';
    if (expected.mass_group != actual.mass_group)
        out << "  mass_group: expected " << list(expected.mass_group) << ", got " << list(actual.mass_group)
            << '\n';
    if (expected.temperature_index != actual.temperature_index) {
        auto str = [](const std::optional<std::size_t>& t) { return t ? std::to_string(*t) : "none"; };
        out << "  temperature_index: expected " << str(expected.temperature_index) << ", got "
            << str(actual.temperature_index) << '\n';
    }
    return out.str();
}

TrajectoryDataset model_view(const TrajectoryDataset& ds, bool mass_map) {
    if (!mass_map) return ds;
    if (ds.schema.mass_group.empty()) throw ConfigError("mass_map: the dataset has an empty mass group");
    TrajectoryDataset v = ds;
    v.raw = massmap::collapse(ds.raw, ds.schema);
    v.schema = massmap::collapsed_schema(ds.schema);
    v.norm = fit_normalization(v.select(v.train), v.schema);
    return v;
}

Tensor Surrogate::predict(const Tensor& y0) const {
    if (!mass_map) return predict_raw(model, y0);
    return massmap::expand(predict_raw(model, massmap::collapse(y0, physical)), physical, true);
}

Tensor Surrogate::rollout(const Tensor& y0, int segments) const {
    if (!mass_map) return recursive_predict(model, y0, segments);
    return massmap::expand(recursive_predict(model, massmap::collapse(y0, physical), segments), physical, true);
}

void save_surrogate(const Surrogate& s, const fs::path& dir) {
    save_checkpoint(s.model, dir);
    io::write_json(dir / "surrogate.json", {{"mass_map", s.mass_map}, {"physical_schema", io::to_json(s.physical)}});
}

Surrogate load_surrogate(const fs::path& dir) {
    Surrogate s;
    s.model = load_checkpoint(dir);
    s.physical = s.model.schema;
    if (fs::exists(dir / "surrogate.json")) {
        const auto j = io::read_json(dir / "surrogate.json");
        s.mass_map = j.value("mass_map", false);
        if (j.contains("physical_schema")) s.physical = io::schema_from_json(j.at("physical_schema"));
    }
    if (s.mass_map) {
        const std::string d = schema_diff(massmap::collapsed_schema(s.physical), s.model.schema);
        if (!d.empty()) throw ConfigError("checkpoint " + dir.string() + " is inconsistent with its mass map:\n" + d);
    }
    return s;
}

SplitReport evaluate_split(const Surrogate& s, const TrajectoryDataset& ds, const std::vector<std::size_t>& idx,
                           std::size_t seg_len) {
    const std::string d = schema_diff(s.physical, ds.schema);
    if (!d.empty()) throw ConfigError("checkpoint and dataset schemas differ:\n" + d);
    if (idx.empty()) throw ConfigError("evaluate: empty split");
    auto seg = time_decompose(ds.select(idx), seg_len, idx);
    Tensor pred = s.predict(seg.branch_inputs);
    return {eval::report(seg.segments, pred, ds.schema, eval::Mode::Segmented),
            eval::report(seg.segments, pred, ds.schema, eval::Mode::Reconstructed, seg.segments_per_trajectory)};
}

eval::AccumulationCurves evaluate_rollout(const Surrogate& s, const TrajectoryDataset& ds,
                                          const std::vector<std::size_t>& idx, int segments) {
    const std::string d = schema_diff(s.physical, ds.schema);
    if (!d.empty()) throw ConfigError("checkpoint and dataset schemas differ:\n" + d);
    if (idx.empty()) throw ConfigError("rollout: empty split");
    if (segments < 1) throw ConfigError("rollout: need at least one segment");
    const std::size_t nt = s.model.num_times();
    const std::size_t rows = std::size_t(segments) * (nt - 1) + 1;
    if (rows > ds.num_rows()) {
        throw ConfigError("rollout: " + std::to_string(segments) + " segments need " + std::to_string(rows) +
                          " rows, the dataset has " + std::to_string(ds.num_rows()) + " (at most " +
                          std::to_string((ds.num_rows() - 1) / (nt - 1)) + " segments)");
    }
    Tensor truth = first_rows(ds.select(idx), rows);
    return eval::accumulation_from_rollout(truth, s.rollout(row_zero(truth), segments), nt, ds.schema);
}

RunOutcome train_run(const ExperimentConfig& cfg, const TrajectoryDataset& ds, std::uint64_t seed,
                     const fs::path& run_dir) {
    cfg.validate();
    if (ds.train.empty()) throw ConfigError("train: the dataset has no training trajectories");
    const TrajectoryDataset view = model_view(ds, cfg.mass_map);
    const std::size_t L = cfg.segment_length, j = view.schema.size();

    const auto seg_train = time_decompose(view.select(view.train), L, view.train);
    const TrainingData train = make_training_data(seg_train, view.schema, view.norm);
    std::optional<TrainingData> test;
    if (!view.test.empty())
        test = make_training_data(time_decompose(view.select(view.test), L, view.test), view.schema, view.norm);

    Rng init = Rng::stream(seed, "init");
    DeepONetModel m = make_model(view.schema, view.norm, build_network(cfg.branch, j, j * cfg.p),
                                 build_network(cfg.trunk, 1, j * cfg.p), cfg.p, cfg.paradigm, L, view.dt, init);
    if (cfg.paradigm == Paradigm::OneStep) {
        m.pou = cfg.pou_enabled();
        m.bound = cfg.bound_value();
    }

    if (!run_dir.empty()) fs::create_directories(run_dir);
    auto at = [&](const char* name) { return run_dir.empty() ? fs::path{} : run_dir / name; };

    RunOutcome out;
    out.seed = seed;
    TrainConfig tc = cfg.training(seed);
    if (cfg.paradigm == Paradigm::OneStep) {
        HistoryStream h(at("history.csv"));
        tc.on_eval = h.callback();
        out.result = train_one_step(m, train, test ? &*test : nullptr, tc);
        if (!run_dir.empty()) write_weights_csv(run_dir / "weights.csv", out.result);
    } else {
        TrunkResult trunk;
        {
            HistoryStream h(at("history_trunk.csv"));
            tc.on_eval = h.callback();
            trunk = train_trunk(m, train, tc);
        }
        out.trunk_result = trunk.log;
        const auto art = factorize_trunk(m, train, cfg.least_squares_coefficients ? nullptr : &trunk.a);
        HistoryStream h(at("history_branch.csv"));
        tc.on_eval = h.callback();
        out.result = train_branch(m, art, train, test ? &*test : nullptr, tc);
        if (!run_dir.empty()) {
            write_weights_csv(run_dir / "weights_trunk.csv", out.trunk_result);
            write_weights_csv(run_dir / "weights_branch.csv", out.result);
        }
    }
    out.final_train_rel_l2 = out.result.history.back().train_rel_l2;
    out.surrogate = Surrogate{std::move(m), cfg.mass_map, ds.schema};
    if (!run_dir.empty()) save_surrogate(out.surrogate, run_dir / "checkpoint");
    if (!ds.test.empty()) out.test = evaluate_split(out.surrogate, ds, ds.test, L);
    return out;
}

}  // namespace amore::exp
