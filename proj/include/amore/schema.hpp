#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "amore/autodiff.hpp"
#include "amore/tensor.hpp"

namespace amore {

// Names and roles of the j state variables carried by every trajectory.
struct StateSchema {
    std::vector<std::string> names;
    std::optional<std::size_t> temperature_index;
    // Indices whose physical values sum to 1 (species mass fractions).
    std::vector<std::size_t> mass_group;
    std::vector<bool> log_transform;

    std::size_t size() const noexcept { return names.size(); }
    // Throws ConfigError on inconsistent indices or flag counts.
    void validate() const;
    bool operator==(const StateSchema&) const = default;
};

// Per-state extrema in transformed (log or identity) space.
struct NormalizationParams {
    std::vector<double> min;
    std::vector<double> max;

    void validate(std::size_t j) const;
    bool operator==(const NormalizationParams&) const = default;
};

// Extrema over every element of `raw` [..., j]. A state with a constant value
// gets a symmetric unit margin so max > min always holds.
NormalizationParams fit_normalization(const Tensor& raw, const StateSchema& schema);

// y_n = 2 (g(y) - min) / (max - min) - 1 along the trailing axis, g = log or identity.
// Throws DomainError naming the flat row and state for nonpositive values under log.
Tensor normalize(const Tensor& raw, const StateSchema& schema, const NormalizationParams& params);
Tensor denormalize(const Tensor& norm, const StateSchema& schema,
                   const NormalizationParams& params);
ad::Var denormalize(ad::Var norm, const StateSchema& schema, const NormalizationParams& params);

}  // namespace amore
