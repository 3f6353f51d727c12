#include "amore/schema.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "amore/error.hpp"

namespace amore {

void StateSchema::validate() const {
    const std::size_t j = names.size();
    if (j == 0) throw ConfigError("schema: no states");
    if (log_transform.size() != j) {
        throw ConfigError("schema: " + std::to_string(log_transform.size()) +
                          " log flags for " + std::to_string(j) + " states");
    }
    if (temperature_index && *temperature_index >= j) {
        throw ConfigError("schema: temperature index out of range");
    }
    std::set<std::size_t> seen;
    for (auto k : mass_group) {
        if (k >= j) throw ConfigError("schema: mass group index " + std::to_string(k) + " out of range");
        if (!seen.insert(k).second) throw ConfigError("schema: duplicate mass group index");
        if (temperature_index && k == *temperature_index) {
            throw ConfigError("schema: temperature cannot belong to the mass group");
        }
    }
}

void NormalizationParams::validate(std::size_t j) const {
    if (min.size() != j || max.size() != j) {
        throw DimensionError("normalization: expected " + std::to_string(j) + " states");
    }
    for (std::size_t a = 0; a < j; ++a) {
        if (!(max[a] > min[a])) {
            throw ConfigError("normalization: max <= min for state " + std::to_string(a));
        }
    }
}

namespace {

std::size_t trailing(const Tensor& t, const StateSchema& schema) {
    if (t.rank() == 0 || t.shape().back() != schema.size()) {
        throw DimensionError("normalization: trailing axis of " + shape_str(t.shape()) +
                             " does not match " + std::to_string(schema.size()) + " states");
    }
    return schema.size();
}

double transformed(double y, const StateSchema& schema, std::size_t row, std::size_t state) {
    if (!schema.log_transform[state]) return y;
    if (!(y > 0.0)) {
        throw DomainError("normalization: nonpositive value " + std::to_string(y) + " at row " +
                          std::to_string(row) + ", state " + std::to_string(state) + " (" +
                          schema.names[state] + ")");
    }
    return std::log(y);
}

}  // namespace

NormalizationParams fit_normalization(const Tensor& raw, const StateSchema& schema) {
    const std::size_t j = trailing(raw, schema);
    NormalizationParams p;
    p.min.assign(j, std::numeric_limits<double>::infinity());
    p.max.assign(j, -std::numeric_limits<double>::infinity());
    const std::size_t rows = raw.size() / j;
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t a = 0; a < j; ++a) {
            const double g = transformed(raw[r * j + a], schema, r, a);
            p.min[a] = std::min(p.min[a], g);
            p.max[a] = std::max(p.max[a], g);
        }
    for (std::size_t a = 0; a < j; ++a) {
        if (!(p.max[a] > p.min[a])) {
            p.min[a] -= 1.0;
            p.max[a] += 1.0;
        }
    }
    return p;
}

Tensor normalize(const Tensor& raw, const StateSchema& schema, const NormalizationParams& params) {
    const std::size_t j = trailing(raw, schema);
    params.validate(j);
    Tensor out(raw.shape());
    const std::size_t rows = raw.size() / j;
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t a = 0; a < j; ++a) {
            const double g = transformed(raw[r * j + a], schema, r, a);
            out[r * j + a] = 2.0 * (g - params.min[a]) / (params.max[a] - params.min[a]) - 1.0;
        }
    return out;
}

Tensor denormalize(const Tensor& norm, const StateSchema& schema,
                   const NormalizationParams& params) {
    const std::size_t j = trailing(norm, schema);
    params.validate(j);
    Tensor out(norm.shape());
    const std::size_t rows = norm.size() / j;
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t a = 0; a < j; ++a) {
            const double g =
                (norm[r * j + a] + 1.0) * 0.5 * (params.max[a] - params.min[a]) + params.min[a];
            out[r * j + a] = schema.log_transform[a] ? std::exp(g) : g;
        }
    return out;
}

ad::Var denormalize(ad::Var norm, const StateSchema& schema, const NormalizationParams& params) {
    const std::size_t j = trailing(norm.value(), schema);
    params.validate(j);
    std::vector<double> scale(j), shift(j);
    for (std::size_t a = 0; a < j; ++a) {
        scale[a] = 0.5 * (params.max[a] - params.min[a]);
        shift[a] = scale[a] + params.min[a];
    }
    ad::Var g = ad::affine_last_axis(norm, scale, shift);
    const auto n_log = std::count(schema.log_transform.begin(), schema.log_transform.end(), true);
    if (n_log == 0) return g;
    if (n_log == static_cast<long>(j)) return ad::exp(g);
    // Mixed flags: blend with a constant 0/1 mask. The exponent is masked first
    // so linear states (temperature in kelvin) never reach exp.
    Tensor mask(g.shape());
    for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = schema.log_transform[i % j] ? 1.0 : 0.0;
    Tensor inv(g.shape());
    for (std::size_t i = 0; i < inv.size(); ++i) inv[i] = 1.0 - mask[i];
    ad::Tape& tape = *norm.tape;
    ad::Var m = tape.constant(std::move(mask));
    return ad::add(ad::mul(ad::exp(ad::mul(g, m)), m), ad::mul(g, tape.constant(std::move(inv))));
}

}  // namespace amore
