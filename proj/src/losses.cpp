#include "amore/losses.hpp"

#include <cmath>
#include <numeric>

#include "amore/error.hpp"

namespace amore::loss {

AdaptiveWeights::AdaptiveWeights(Kind kind, std::size_t num_samples, std::size_t num_states)
    : kind_(kind) {
    if (kind == Kind::TypeA) {
        values_ = Tensor::ones({num_states});
    } else if (kind == Kind::TypeB) {
        values_ = Tensor::ones({num_samples, num_states});
    } else {
        values_ = Tensor::ones({num_states});
    }
    budget_ = static_cast<double>(values_.size());
}

bool AdaptiveWeights::is_update_epoch(int epoch, const LossConfig& cfg) const {
    if (kind_ == Kind::NonAdaptive || epoch < cfg.update_first_epoch) return false;
    return (epoch - cfg.update_first_epoch) % cfg.update_every == 0;
}

void AdaptiveWeights::update(const Tensor& rel_errors) {
    if (kind_ == Kind::NonAdaptive) return;
    require_rank(rel_errors, 2, "adaptive weights: relative errors");
    const std::size_t bs = rel_errors.dim(0), j = rel_errors.dim(1);
    Tensor x;
    if (kind_ == Kind::TypeA) {
        if (j != values_.size()) throw DimensionError("adaptive weights: state count mismatch");
        x = Tensor({j});
        for (std::size_t b = 0; b < bs; ++b)
            for (std::size_t a = 0; a < j; ++a) x[a] += rel_errors.at(b, a) / double(bs);
    } else {
        if (rel_errors.shape() != values_.shape()) {
            throw DimensionError("adaptive weights: expected errors " + shape_str(values_.shape()) +
                                 ", got " + shape_str(rel_errors.shape()));
        }
        x = rel_errors;
    }
    double total = 0.0;
    for (double v : x.data()) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw ValidationError("adaptive weights: relative errors must be finite and >= 0");
        }
        total += v;
    }
    if (total <= 0.0) throw ValidationError("adaptive weights: every relative error is zero");
    for (std::size_t i = 0; i < x.size(); ++i) values_[i] = x[i] / total * budget_;
}

Tensor AdaptiveWeights::select(const std::vector<std::size_t>& samples) const {
    if (kind_ != Kind::TypeB) return values_;
    const std::size_t j = values_.dim(1);
    Tensor out({samples.size(), j});
    for (std::size_t r = 0; r < samples.size(); ++r)
        for (std::size_t a = 0; a < j; ++a) out.at(r, a) = values_.at(samples[r], a);
    return out;
}

Tensor relative_errors(const Tensor& truth, const Tensor& pred) {
    require_rank(truth, 3, "relative_errors truth");
    if (truth.shape() != pred.shape()) {
        throw DimensionError("relative_errors: " + shape_str(truth.shape()) + " vs " +
                             shape_str(pred.shape()));
    }
    const std::size_t bs = truth.dim(0), nt = truth.dim(1), j = truth.dim(2);
    Tensor out({bs, j});
    for (std::size_t b = 0; b < bs; ++b)
        for (std::size_t a = 0; a < j; ++a) {
            double num = 0.0, den = 0.0;
            for (std::size_t c = 0; c < nt; ++c) {
                const double y = truth.at(b, c, a), d = y - pred.at(b, c, a);
                num += d * d;
                den += y * y;
            }
            if (den <= 0.0) {
                throw UndefinedMetricError("relative L2 undefined for a zero reference (sample " +
                                      std::to_string(b) + ", state " + std::to_string(a) + ")");
            }
            out.at(b, a) = std::sqrt(num / den);
        }
    return out;
}

namespace {

void require_same(const ad::Var& pred, const Tensor& target, const char* what) {
    if (pred.shape() != target.shape()) {
        throw DimensionError(std::string(what) + ": prediction " + shape_str(pred.shape()) +
                             " vs target " + shape_str(target.shape()));
    }
}

// Weight tensor of pred's shape that gives element (b, ..., a, ...) the value
// scale * w(b, a) (Type-B) or scale * w(a) (Type-A).
Tensor broadcast_weights(const Shape& shape, const Tensor& w, std::size_t state_axis,
                         bool per_sample, double scale) {
    if (shape.size() != 3 || state_axis == 0 || state_axis > 2) {
        throw DimensionError("weighted loss: expected a rank-3 prediction with states on axis 1 or 2");
    }
    const std::size_t bs = shape[0], j = shape[state_axis];
    if (per_sample ? w.shape() != Shape{bs, j} : w.shape() != Shape{j}) {
        throw DimensionError("weighted loss: weights " + shape_str(w.shape()) +
                             " do not fit prediction " + shape_str(shape));
    }
    Tensor out(shape);
    const std::size_t n1 = shape[1], n2 = shape[2];
    for (std::size_t b = 0; b < bs; ++b)
        for (std::size_t i = 0; i < n1; ++i)
            for (std::size_t k = 0; k < n2; ++k) {
                const std::size_t a = state_axis == 2 ? k : i;
                out[(b * n1 + i) * n2 + k] = scale * (per_sample ? w[b * j + a] : w[a]);
            }
    return out;
}

}  // namespace

ad::Var mse_data_loss(ad::Var pred, const Tensor& target) {
    require_same(pred, target, "mse_data_loss");
    Tensor w(target.shape(), 1.0 / double(target.size()));
    return ad::weighted_squared_error(pred, target, w);
}

ad::Var com_loss(ad::Var pred_raw, const StateSchema& schema) {
    if (schema.mass_group.empty()) throw ConfigError("com_loss: schema has an empty mass group");
    require_rank(pred_raw.value(), 3, "com_loss prediction");
    const std::size_t bs = pred_raw.shape()[0], nt = pred_raw.shape()[1];
    ad::Var group = ad::take(pred_raw, 2, schema.mass_group);
    ad::Var total = ad::sum_last_axis(group);  // [bs, nt]
    Tensor ones({bs, nt}, 1.0);
    Tensor w({bs, nt}, 1.0 / double(bs * nt));
    return ad::weighted_squared_error(total, ones, w);
}

ad::Var weighted_loss_typeA(ad::Var pred, const Tensor& target, const Tensor& w,
                            std::size_t state_axis) {
    require_same(pred, target, "weighted_loss_typeA");
    const Shape& s = target.shape();
    const std::size_t per_state = s[0] * (state_axis == 2 ? s[1] : s[2]);
    return ad::weighted_squared_error(
        pred, target, broadcast_weights(s, w, state_axis, false, 1.0 / double(per_state)));
}

ad::Var weighted_loss_typeB(ad::Var pred, const Tensor& target, const Tensor& w,
                            std::size_t state_axis) {
    require_same(pred, target, "weighted_loss_typeB");
    const Shape& s = target.shape();
    const std::size_t per_traj = state_axis == 2 ? s[1] : s[2];
    return ad::weighted_squared_error(
        pred, target, broadcast_weights(s, w, state_axis, true, 1.0 / double(per_traj)));
}

ad::Var data_loss(Kind kind, ad::Var pred, const Tensor& target, const Tensor& w,
                  std::size_t state_axis) {
    switch (kind) {
        case Kind::TypeA: return weighted_loss_typeA(pred, target, w, state_axis);
        case Kind::TypeB: return weighted_loss_typeB(pred, target, w, state_axis);
        case Kind::NonAdaptive: break;
    }
    return mse_data_loss(pred, target);
}

double com_weight(const LossConfig& cfg, const Tensor& active_weights) {
    if (cfg.kind == Kind::NonAdaptive) return cfg.com_multiplier;
    const auto d = active_weights.data();
    return cfg.com_multiplier * std::accumulate(d.begin(), d.end(), 0.0);
}

ad::Var combined_loss(ad::Var data, ad::Var com, const LossConfig& cfg,
                      const Tensor& active_weights) {
    if (!cfg.com) return data;
    return ad::add(data, ad::scale(com, com_weight(cfg, active_weights)));
}

}  // namespace amore::loss
