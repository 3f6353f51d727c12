#include "amore/deeponet.hpp"

#include <cmath>

#include "amore/error.hpp"
#include "amore/linalg.hpp"

namespace amore {

namespace fs = std::filesystem;

namespace {

std::vector<ad::Var> constants(ad::Tape& tape, const std::vector<Tensor>& ts) {
    std::vector<ad::Var> out;
    out.reserve(ts.size());
    for (const auto& t : ts) out.push_back(tape.constant(t));
    return out;
}

void check_inputs(const DeepONetModel& m, const Tensor& y0) {
    if (y0.rank() != 2 || y0.dim(1) != m.num_states()) {
        throw DimensionError("deeponet: initial states " + shape_str(y0.shape()) +
                             " must be [bs, " + std::to_string(m.num_states()) + "]");
    }
}

}  // namespace

void DeepONetModel::validate() const {
    schema.validate();
    norm.validate(schema.size());
    const std::size_t j = schema.size();
    if (p == 0) throw ConfigError("deeponet: p must be positive");
    if (branch.input_dim() != j) {
        throw ConfigError("deeponet: branch input width " + std::to_string(branch.input_dim()) +
                          " != state count " + std::to_string(j));
    }
    if (trunk.input_dim() != 1) throw ConfigError("deeponet: trunk input width must be 1");
    if (branch.output_dim() != j * p || trunk.output_dim() != j * p) {
        throw ConfigError("deeponet: branch and trunk must both emit j*p = " +
                          std::to_string(j * p) + " neurons");
    }
    if (time_grid.rank() != 2 || time_grid.dim(1) != 1 || time_grid.dim(0) < 2) {
        throw ConfigError("deeponet: time grid must be [n_t1 >= 2, 1]");
    }
    if (paradigm == Paradigm::TwoStep && (pou || bound > 0.0)) {
        throw ConfigError("deeponet: two-step mode takes neither PoU nor an output bound");
    }
    if (!q_star.buffer().empty()) {
        if (q_star.shape() != Shape{j, time_grid.dim(0), p}) {
            throw DimensionError("deeponet: Q* has shape " + shape_str(q_star.shape()));
        }
        if (r_star.shape() != Shape{j, p, p}) {
            throw DimensionError("deeponet: R* has shape " + shape_str(r_star.shape()));
        }
    }
}

Tensor normalized_time_grid(std::size_t n_t1) {
    if (n_t1 < 2) throw ConfigError("time grid needs at least two points");
    Tensor t({n_t1, 1});
    for (std::size_t i = 0; i < n_t1; ++i) t[i] = -1.0 + 2.0 * double(i) / double(n_t1 - 1);
    return t;
}

DeepONetModel make_model(StateSchema schema, NormalizationParams norm,
                         const nn::NetworkConfig& branch, const nn::NetworkConfig& trunk,
                         std::size_t p, Paradigm paradigm, std::size_t n_t1, double dt, Rng& rng) {
    DeepONetModel m;
    m.schema = std::move(schema);
    m.norm = std::move(norm);
    m.branch = nn::Network(branch);
    m.trunk = nn::Network(trunk);
    m.p = p;
    m.paradigm = paradigm;
    if (paradigm == Paradigm::TwoStep) {
        m.pou = false;
        m.bound = 0.0;
    }
    m.time_grid = normalized_time_grid(n_t1);
    m.dt = dt;
    m.validate();
    m.branch_params = m.branch.init_params(rng);
    m.trunk_params = m.trunk.init_params(rng);
    return m;
}

ad::Var trunk_basis(const DeepONetModel& m, std::span<const ad::Var> trunk_params, ad::Var t,
                    bool pou) {
    ad::Var c = m.trunk.forward(trunk_params, t);
    c = ad::reshape(c, {t.shape()[0], m.num_states(), m.p});
    return pou ? ad::softmax_last_axis(c) : c;
}

ad::Var branch_coefficients(const DeepONetModel& m, std::span<const ad::Var> branch_params,
                            ad::Var y0_norm) {
    ad::Var b = m.branch.forward(branch_params, y0_norm);
    return ad::reshape(b, {y0_norm.shape()[0], m.num_states(), m.p});
}

ad::Var forward_one_step(const DeepONetModel& m, std::span<const ad::Var> branch_params,
                         std::span<const ad::Var> trunk_params, ad::Var y0_norm, ad::Var t) {
    ad::Var out = ad::contract_branch_trunk(branch_coefficients(m, branch_params, y0_norm),
                                            trunk_basis(m, trunk_params, t, m.pou));
    if (m.bound > 0.0) out = ad::scale(ad::tanh(out), m.bound);
    return out;
}

Tensor forward_one_step(const DeepONetModel& m, const Tensor& y0_norm) {
    check_inputs(m, y0_norm);
    ad::Tape tape;
    auto bp = constants(tape, m.branch_params);
    auto tp = constants(tape, m.trunk_params);
    return forward_one_step(m, bp, tp, tape.constant(y0_norm), tape.constant(m.time_grid))
        .value();
}

Tensor forward_two_step(const DeepONetModel& m, const Tensor& y0_norm) {
    if (m.q_star.buffer().empty()) {
        throw ConfigError("deeponet: two-step prediction needs a factorized trunk (Q*)");
    }
    check_inputs(m, y0_norm);
    ad::Tape tape;
    auto bp = constants(tape, m.branch_params);
    ad::Var b = branch_coefficients(m, bp, tape.constant(y0_norm));
    return contract_predict_2step(b.value(), m.q_star);
}

Tensor forward_two_step_via_trunk(const DeepONetModel& m, const Tensor& y0_norm) {
    if (m.r_star.buffer().empty()) {
        throw ConfigError("deeponet: two-step prediction needs a factorized trunk (R*)");
    }
    check_inputs(m, y0_norm);
    ad::Tape tape;
    auto bp = constants(tape, m.branch_params);
    auto tp = constants(tape, m.trunk_params);
    const Tensor b = branch_coefficients(m, bp, tape.constant(y0_norm)).value();
    const Tensor c = trunk_basis(m, tp, tape.constant(m.time_grid), false).value();
    const std::size_t bs = b.dim(0), j = m.num_states(), p = m.p, nt = m.num_times();
    Tensor out({bs, nt, j});
    for (std::size_t a = 0; a < j; ++a) {
        Tensor tr({nt, p}), r({p, p}), br({bs, p});
        for (std::size_t i = 0; i < nt; ++i)
            for (std::size_t k = 0; k < p; ++k) tr[i * p + k] = c.at(i, a, k);
        for (std::size_t k = 0; k < p * p; ++k) r[k] = m.r_star[a * p * p + k];
        for (std::size_t s = 0; s < bs; ++s)
            for (std::size_t k = 0; k < p; ++k) br[s * p + k] = b.at(s, a, k);
        Tensor y = matmul(tr, solve_upper(r, transpose(br)));  // [nt, bs]
        for (std::size_t i = 0; i < nt; ++i)
            for (std::size_t s = 0; s < bs; ++s) out.at(s, i, a) = y[i * bs + s];
    }
    return out;
}

Tensor predict_normalized(const DeepONetModel& m, const Tensor& y0_norm) {
    return m.paradigm == Paradigm::OneStep ? forward_one_step(m, y0_norm)
                                           : forward_two_step(m, y0_norm);
}

Tensor predict_raw(const DeepONetModel& m, const Tensor& y0_raw) {
    return denormalize(predict_normalized(m, normalize(y0_raw, m.schema, m.norm)), m.schema,
                       m.norm);
}

Tensor recursive_predict(const DeepONetModel& m, const Tensor& y0_raw, int num_segments) {
    if (num_segments < 1) throw ConfigError("recursive prediction needs at least one segment");
    check_inputs(m, y0_raw);
    const std::size_t bs = y0_raw.dim(0), j = m.num_states(), nt = m.num_times();
    const std::size_t total = std::size_t(num_segments) * (nt - 1) + 1;
    Tensor out({bs, total, j});
    Tensor current = y0_raw;
    for (int s = 0; s < num_segments; ++s) {
        Tensor pred;
        try {
            pred = predict_raw(m, current);
        } catch (const DomainError& e) {
            throw RolloutDivergenceError(std::string("rollout left the log domain: ") + e.what(), s);
        }
        for (double v : pred.data()) {
            if (!std::isfinite(v)) {
                throw RolloutDivergenceError("rollout produced a non-finite state", s);
            }
        }
        const std::size_t first = s == 0 ? 0 : 1;
        const std::size_t offset = std::size_t(s) * (nt - 1);
        for (std::size_t b = 0; b < bs; ++b)
            for (std::size_t i = first; i < nt; ++i)
                for (std::size_t a = 0; a < j; ++a) out.at(b, offset + i, a) = pred.at(b, i, a);
        for (std::size_t b = 0; b < bs; ++b)
            for (std::size_t a = 0; a < j; ++a) current.at(b, a) = pred.at(b, nt - 1, a);
    }
    return out;
}

io::Json network_config_to_json(const nn::NetworkConfig& cfg) {
    if (const auto* r = std::get_if<nn::ResNetConfig>(&cfg)) {
        return {{"family", "resnet"},
                {"input_dim", r->input_dim},
                {"hidden_width", r->hidden_width},
                {"num_hidden_layers", r->num_hidden_layers},
                {"output_dim", r->output_dim},
                {"activation", r->activation == nn::Activation::Tanh ? "tanh" : "sin"}};
    }
    const auto& k = std::get<nn::KanConfig>(cfg);
    return {{"family", "kan"},
            {"layer_dims", k.layer_dims},
            {"order", k.order},
            {"alpha", k.alpha},
            {"beta", k.beta}};
}

nn::NetworkConfig network_config_from_json(const io::Json& j) {
    try {
        const std::string family = j.at("family").get<std::string>();
        if (family == "resnet") {
            nn::ResNetConfig r;
            r.input_dim = j.at("input_dim").get<std::size_t>();
            r.hidden_width = j.at("hidden_width").get<std::size_t>();
            r.num_hidden_layers = j.at("num_hidden_layers").get<std::size_t>();
            r.output_dim = j.at("output_dim").get<std::size_t>();
            const std::string act = j.value("activation", std::string("tanh"));
            if (act != "tanh" && act != "sin") throw ConfigError("unknown activation '" + act + "'");
            r.activation = act == "tanh" ? nn::Activation::Tanh : nn::Activation::Sin;
            return r;
        }
        if (family == "kan") {
            nn::KanConfig k;
            k.layer_dims = j.at("layer_dims").get<std::vector<std::size_t>>();
            k.order = j.value("order", std::size_t{3});
            k.alpha = j.value("alpha", 1.0);
            k.beta = j.value("beta", 1.0);
            return k;
        }
        throw ConfigError("unknown network family '" + family + "'");
    } catch (const io::Json::exception& e) {
        throw ConfigError(std::string("network config: ") + e.what());
    }
}

void save_checkpoint(const DeepONetModel& m, const fs::path& dir) {
    fs::create_directories(dir);
    io::Json man;
    man["format"] = "amore-checkpoint-1";
    man["paradigm"] = m.paradigm == Paradigm::OneStep ? "one-step" : "two-step";
    man["p"] = m.p;
    man["pou"] = m.pou;
    man["bound"] = m.bound;
    man["dt"] = m.dt;
    man["schema"] = io::to_json(m.schema);
    man["normalization"] = io::to_json(m.norm);
    man["branch"] = network_config_to_json(m.branch.config());
    man["trunk"] = network_config_to_json(m.trunk.config());
    io::Json tensors = io::Json::array();
    const auto& bspecs = m.branch.param_specs();
    for (std::size_t i = 0; i < bspecs.size(); ++i)
        tensors.push_back(io::save_tensor(dir, "branch." + bspecs[i].name, m.branch_params[i]));
    const auto& tspecs = m.trunk.param_specs();
    for (std::size_t i = 0; i < tspecs.size(); ++i)
        tensors.push_back(io::save_tensor(dir, "trunk." + tspecs[i].name, m.trunk_params[i]));
    tensors.push_back(io::save_tensor(dir, "time_grid", m.time_grid));
    if (!m.q_star.buffer().empty()) {
        tensors.push_back(io::save_tensor(dir, "q_star", m.q_star));
        tensors.push_back(io::save_tensor(dir, "r_star", m.r_star));
    }
    man["tensors"] = tensors;
    io::write_json(dir / "manifest.json", man);
}

DeepONetModel load_checkpoint(const fs::path& dir) {
    if (!fs::exists(dir / "manifest.json")) {
        throw IoError("no checkpoint manifest in " + dir.string());
    }
    const io::Json man = io::read_json(dir / "manifest.json");
    DeepONetModel m;
    try {
        if (man.at("format") != "amore-checkpoint-1") throw ConfigError("unknown checkpoint format");
        m.paradigm = man.at("paradigm") == "one-step" ? Paradigm::OneStep : Paradigm::TwoStep;
        m.p = man.at("p").get<std::size_t>();
        m.pou = man.at("pou").get<bool>();
        m.bound = man.at("bound").get<double>();
        m.dt = man.at("dt").get<double>();
        m.schema = io::schema_from_json(man.at("schema"));
        m.norm = io::normalization_from_json(man.at("normalization"));
        m.branch = nn::Network(network_config_from_json(man.at("branch")));
        m.trunk = nn::Network(network_config_from_json(man.at("trunk")));
        for (const auto& e : man.at("tensors")) {
            const std::string name = e.at("name").get<std::string>();
            Tensor t = io::load_tensor(dir, e);
            if (name.rfind("branch.", 0) == 0) {
                m.branch_params.push_back(std::move(t));
            } else if (name.rfind("trunk.", 0) == 0) {
                m.trunk_params.push_back(std::move(t));
            } else if (name == "time_grid") {
                m.time_grid = std::move(t);
            } else if (name == "q_star") {
                m.q_star = std::move(t);
            } else if (name == "r_star") {
                m.r_star = std::move(t);
            }
        }
    } catch (const io::Json::exception& e) {
        throw ConfigError(std::string("checkpoint manifest: ") + e.what());
    }
    m.validate();
    if (m.branch_params.size() != m.branch.param_specs().size() ||
        m.trunk_params.size() != m.trunk.param_specs().size()) {
        throw IoError("checkpoint: parameter count does not match the network configs");
    }
    return m;
}

}  // namespace amore
