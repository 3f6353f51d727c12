#include "amore/trainer.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

#include "amore/error.hpp"
#include "amore/linalg.hpp"
#include "amore/rng.hpp"

namespace amore {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Tensor gather_rows(const Tensor& t, const std::vector<std::size_t>& rows) {
    Shape shape = t.shape();
    const std::size_t stride = t.size() / shape[0];
    shape[0] = rows.size();
    Tensor out(shape);
    for (std::size_t r = 0; r < rows.size(); ++r)
        std::copy_n(t.data().begin() + rows[r] * stride, stride, out.data().begin() + r * stride);
    return out;
}

// Contiguous chunks of a permutation; the first (n % k) chunks get one extra row.
std::vector<std::vector<std::size_t>> partition(const std::vector<std::size_t>& perm,
                                                std::size_t k) {
    std::vector<std::vector<std::size_t>> out(k);
    const std::size_t base = perm.size() / k, extra = perm.size() % k;
    std::size_t pos = 0;
    for (std::size_t c = 0; c < k; ++c) {
        const std::size_t len = base + (c < extra ? 1 : 0);
        out[c].assign(perm.begin() + pos, perm.begin() + pos + len);
        pos += len;
    }
    return out;
}

std::vector<ad::Var> leaves(ad::Tape& tape, const std::vector<Tensor>& ts) {
    std::vector<ad::Var> out;
    out.reserve(ts.size());
    for (const auto& t : ts) out.push_back(tape.leaf(t));
    return out;
}

double mean_of(const Tensor& t) {
    double s = 0.0;
    for (double v : t.data()) s += v;
    return s / double(t.size());
}

// Shared optimizer loop. `loss` records one minibatch on a fresh tape;
// `predict_raw` gives full physical-space training predictions for weight
// updates and logging; `test_error` returns NaN when there is no test split.
struct Loop {
    std::vector<Tensor> params;
    std::function<ad::Var(ad::Tape&, const std::vector<ad::Var>&, const std::vector<std::size_t>&,
                          const Tensor&)>
        loss;
    std::function<Tensor(const std::vector<Tensor>&)> predict_raw;
    std::function<double(const std::vector<Tensor>&)> test_error;
};

TrainResult run_loop(Loop& loop, const TrainConfig& cfg, const Tensor& train_raw) {
    const std::size_t n = train_raw.dim(0), j = train_raw.dim(2);
    cfg.validate(n);
    TrainResult result;
    loss::AdaptiveWeights weights(cfg.loss.kind, n, j);
    ad::Adam opt(cfg.adam, loop.params);
    Rng shuffle = Rng::stream(cfg.seed, "shuffle");
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (weights.is_update_epoch(epoch, cfg.loss)) {
            weights.update(loss::relative_errors(train_raw, loop.predict_raw(loop.params)));
            result.weights.push_back({epoch, weights.values(), weights.budget()});
        }
        const double lr = cfg.adam.schedule.at(epoch);
        const auto chunks = partition(shuffle.permutation(n), cfg.minibatches_at(epoch));
        double loss_sum = 0.0;
        for (const auto& rows : chunks) {
            ad::Tape tape;
            auto vars = leaves(tape, loop.params);
            ad::Var l = loop.loss(tape, vars, rows, weights.select(rows));
            const double lv = l.value().item();
            if (!std::isfinite(lv)) {
                throw TrainingDivergedError("training diverged: non-finite loss at epoch " +
                                                std::to_string(epoch),
                                            epoch);
            }
            loss_sum += lv;
            opt.step(loop.params, tape.grad(l, vars), lr);
        }
        const bool last = epoch + 1 == cfg.epochs;
        if ((cfg.eval_every > 0 && (epoch + 1) % cfg.eval_every == 0) || last) {
            HistoryRow row;
            row.epoch = epoch + 1;
            row.loss = loss_sum / double(chunks.size());
            row.train_rel_l2 = mean_of(loss::relative_errors(train_raw, loop.predict_raw(loop.params)));
            row.test_rel_l2 = loop.test_error ? loop.test_error(loop.params) : kNaN;
            row.lr = lr;
            result.history.push_back(row);
            if (cfg.on_eval) cfg.on_eval(row);
        }
    }
    return result;
}

std::vector<Tensor> concat(const std::vector<Tensor>& a, const std::vector<Tensor>& b) {
    std::vector<Tensor> out(a);
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

}  // namespace

std::size_t TrainConfig::minibatches_at(int epoch) const {
    if (switch_epoch >= 0 && epoch >= switch_epoch && minibatches_after > 0) {
        return minibatches_after;
    }
    return minibatches;
}

void TrainConfig::validate(std::size_t num_samples) const {
    if (epochs < 1) throw ConfigError("train: epochs must be positive");
    if (minibatches == 0) throw ConfigError("train: minibatch count must be positive");
    if (minibatches > num_samples || minibatches_after > num_samples) {
        throw ConfigError("train: more minibatches than samples (" + std::to_string(num_samples) + ")");
    }
    if (loss.update_every < 1 || loss.update_first_epoch < 0) {
        throw ConfigError("train: invalid adaptive-weight schedule");
    }
}

TrainingData make_training_data(const SegmentedDataset& seg, const StateSchema& schema,
                                const NormalizationParams& norm) {
    TrainingData d;
    d.y_raw = seg.segments;
    d.y_norm = normalize(seg.segments, schema, norm);
    d.y0_norm = normalize(seg.branch_inputs, schema, norm);
    return d;
}

double mean_relative_l2(const DeepONetModel& m, const TrainingData& data) {
    const Tensor pred = denormalize(predict_normalized(m, data.y0_norm), m.schema, m.norm);
    return mean_of(loss::relative_errors(data.y_raw, pred));
}

TrainResult train_one_step(DeepONetModel& m, const TrainingData& train, const TrainingData* test,
                           const TrainConfig& cfg) {
    if (m.paradigm != Paradigm::OneStep) throw ConfigError("train_one_step: model is not one-step");
    if (cfg.loss.com && m.schema.mass_group.empty()) {
        throw ConfigError("train: CoM loss needs a nonempty mass group");
    }
    const std::size_t nb = m.branch_params.size();
    Loop loop;
    loop.params = concat(m.branch_params, m.trunk_params);
    auto split = [nb](const std::vector<ad::Var>& v) {
        return std::make_pair(std::span<const ad::Var>(v.data(), nb),
                              std::span<const ad::Var>(v.data() + nb, v.size() - nb));
    };
    loop.loss = [&](ad::Tape& tape, const std::vector<ad::Var>& vars,
                    const std::vector<std::size_t>& rows, const Tensor& w) {
        auto [bp, tp] = split(vars);
        ad::Var pred = forward_one_step(m, bp, tp, tape.constant(gather_rows(train.y0_norm, rows)),
                                        tape.constant(m.time_grid));
        ad::Var data = loss::data_loss(cfg.loss.kind, pred, gather_rows(train.y_norm, rows), w);
        if (!cfg.loss.com) return data;
        ad::Var com = loss::com_loss(denormalize(pred, m.schema, m.norm), m.schema);
        return loss::combined_loss(data, com, cfg.loss, w);
    };
    auto with_params = [&](const std::vector<Tensor>& params) {
        DeepONetModel view = m;
        view.branch_params.assign(params.begin(), params.begin() + nb);
        view.trunk_params.assign(params.begin() + nb, params.end());
        return view;
    };
    loop.predict_raw = [&](const std::vector<Tensor>& params) {
        const DeepONetModel view = with_params(params);
        return denormalize(forward_one_step(view, train.y0_norm), m.schema, m.norm);
    };
    if (test && test->size() > 0) {
        loop.test_error = [&](const std::vector<Tensor>& params) {
            return mean_relative_l2(with_params(params), *test);
        };
    }
    TrainResult r = run_loop(loop, cfg, train.y_raw);
    m.branch_params.assign(loop.params.begin(), loop.params.begin() + nb);
    m.trunk_params.assign(loop.params.begin() + nb, loop.params.end());
    return r;
}

TrunkResult train_trunk(DeepONetModel& m, const TrainingData& train, const TrainConfig& cfg) {
    if (m.paradigm != Paradigm::TwoStep) throw ConfigError("train_trunk: model is not two-step");
    if (cfg.loss.com) throw ConfigError("train: CoM loss is not used in two-step training");
    const std::size_t j = m.num_states(), p = m.p, n = train.size();
    if (p >= m.num_times()) throw ConfigError("train_trunk: p must be smaller than n_t");
    const std::size_t nt = m.trunk_params.size();
    Rng rng = Rng::stream(cfg.seed, "init-coefficients");
    Tensor a({j, p, n});
    const double lim = 1.0 / std::sqrt(double(p));
    for (double& v : a.data()) v = rng.uniform(-lim, lim);

    // With a frozen trunk the parameter list is just A and the trunk enters as constants.
    const std::size_t na = cfg.freeze_trunk ? 0 : nt;
    auto basis = [&](ad::Tape& tape, const std::vector<ad::Var>& vars) {
        std::vector<ad::Var> tp;
        for (std::size_t i = 0; i < nt; ++i)
            tp.push_back(cfg.freeze_trunk ? tape.constant(m.trunk_params[i]) : vars[i]);
        return trunk_basis(m, tp, tape.constant(m.time_grid), false);
    };
    Loop loop;
    if (!cfg.freeze_trunk) loop.params = m.trunk_params;
    loop.params.push_back(std::move(a));
    loop.loss = [&](ad::Tape& tape, const std::vector<ad::Var>& vars,
                    const std::vector<std::size_t>& rows, const Tensor& w) {
        ad::Var pred = ad::contract_trunk_A(basis(tape, vars), ad::take(vars[na], 2, rows));
        return loss::data_loss(cfg.loss.kind, pred, gather_rows(train.y_norm, rows), w);
    };
    loop.predict_raw = [&](const std::vector<Tensor>& params) {
        ad::Tape tape;
        std::vector<ad::Var> vars;
        for (const auto& t : params) vars.push_back(tape.constant(t));
        return denormalize(ad::contract_trunk_A(basis(tape, vars), vars[na]).value(), m.schema,
                           m.norm);
    };
    TrunkResult out;
    out.log = run_loop(loop, cfg, train.y_raw);
    out.a = loop.params[na];
    if (!cfg.freeze_trunk) m.trunk_params.assign(loop.params.begin(), loop.params.begin() + nt);
    return out;
}

TwoStepArtifacts factorize_basis(const Tensor& basis, const Tensor& y_norm,
                                 const std::vector<std::string>& names, const Tensor* a_opt) {
    require_rank(basis, 3, "factorize basis");
    require_rank(y_norm, 3, "factorize targets");
    const std::size_t nt = basis.dim(0), j = basis.dim(1), p = basis.dim(2), n = y_norm.dim(0);
    if (y_norm.dim(1) != nt || y_norm.dim(2) != j || names.size() != j) {
        throw DimensionError("factorize: basis " + shape_str(basis.shape()) + " vs targets " +
                             shape_str(y_norm.shape()));
    }
    if (p >= nt) throw ConfigError("factorize: p must be smaller than n_t");
    if (a_opt && a_opt->shape() != Shape{j, p, n}) {
        throw DimensionError("factorize: optimized coefficients have shape " +
                             shape_str(a_opt->shape()));
    }
    TwoStepArtifacts art{Tensor({j, nt, p}), Tensor({j, p, p}), Tensor({j, p, n}), Tensor({n, j, p})};
    for (std::size_t s = 0; s < j; ++s) {
        Tensor block({nt, p}), y({nt, n});
        for (std::size_t i = 0; i < nt; ++i)
            for (std::size_t k = 0; k < p; ++k) block[i * p + k] = basis.at(i, s, k);
        for (std::size_t b = 0; b < n; ++b)
            for (std::size_t i = 0; i < nt; ++i) y[i * n + b] = y_norm.at(b, i, s);
        QrFactors f;
        try {
            f = qr_thin(block);
        } catch (const SingularBasisError&) {
            throw SingularBasisError("factorize: trunk block of state " + std::to_string(s) + " (" +
                                     names[s] + ") is rank deficient");
        }
        Tensor coeff({p, n});
        if (a_opt) {
            std::copy_n(a_opt->data().begin() + s * p * n, p * n, coeff.data().begin());
        } else {
            coeff = solve_upper(f.r, matmul(transpose(f.q), y));
        }
        const Tensor u = matmul(f.r, coeff);  // [p, n]
        std::copy(f.q.data().begin(), f.q.data().end(), art.q_star.data().begin() + s * nt * p);
        std::copy(f.r.data().begin(), f.r.data().end(), art.r_star.data().begin() + s * p * p);
        std::copy(coeff.data().begin(), coeff.data().end(), art.a_star.data().begin() + s * p * n);
        for (std::size_t b = 0; b < n; ++b)
            for (std::size_t k = 0; k < p; ++k) art.u.at(b, s, k) = u[k * n + b];
    }
    return art;
}

TwoStepArtifacts factorize_trunk(DeepONetModel& m, const TrainingData& train, const Tensor* a_opt) {
    ad::Tape tape;
    std::vector<ad::Var> tp;
    for (const auto& t : m.trunk_params) tp.push_back(tape.constant(t));
    const Tensor c = trunk_basis(m, tp, tape.constant(m.time_grid), false).value();
    TwoStepArtifacts art = factorize_basis(c, train.y_norm, m.schema.names, a_opt);
    m.q_star = art.q_star;
    m.r_star = art.r_star;
    return art;
}

TrainResult train_branch(DeepONetModel& m, const TwoStepArtifacts& art, const TrainingData& train,
                         const TrainingData* test, const TrainConfig& cfg) {
    if (m.paradigm != Paradigm::TwoStep) throw ConfigError("train_branch: model is not two-step");
    if (cfg.loss.com) throw ConfigError("train: CoM loss is not used in two-step training");
    if (art.u.shape() != Shape{train.size(), m.num_states(), m.p}) {
        throw DimensionError("train_branch: targets U have shape " + shape_str(art.u.shape()));
    }
    m.q_star = art.q_star;
    m.r_star = art.r_star;
    Loop loop;
    loop.params = m.branch_params;
    loop.loss = [&](ad::Tape& tape, const std::vector<ad::Var>& vars,
                    const std::vector<std::size_t>& rows, const Tensor& w) {
        ad::Var b = branch_coefficients(m, vars, tape.constant(gather_rows(train.y0_norm, rows)));
        return loss::data_loss(cfg.loss.kind, b, gather_rows(art.u, rows), w, 1);
    };
    auto with_params = [&](const std::vector<Tensor>& params) {
        DeepONetModel view = m;
        view.branch_params = params;
        return view;
    };
    loop.predict_raw = [&](const std::vector<Tensor>& params) {
        return denormalize(forward_two_step(with_params(params), train.y0_norm), m.schema, m.norm);
    };
    if (test && test->size() > 0) {
        loop.test_error = [&](const std::vector<Tensor>& params) {
            return mean_relative_l2(with_params(params), *test);
        };
    }
    TrainResult r = run_loop(loop, cfg, train.y_raw);
    m.branch_params = loop.params;
    return r;
}

void write_history_csv(const std::filesystem::path& path, const TrainResult& r) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string());
    out << "epoch,loss,train_rel_l2,test_rel_l2,lr\n" << std::setprecision(17);
    for (const auto& h : r.history)
        out << h.epoch << ',' << h.loss << ',' << h.train_rel_l2 << ',' << h.test_rel_l2 << ','
            << h.lr << '\n';
}

void write_weights_csv(const std::filesystem::path& path, const TrainResult& r) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string());
    out << "epoch,index,value\n" << std::setprecision(17);
    for (const auto& w : r.weights)
        for (std::size_t i = 0; i < w.values.size(); ++i)
            out << w.epoch << ',' << i << ',' << w.values[i] << '\n';
}

}  // namespace amore
