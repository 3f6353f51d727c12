#pragma once

#include <vector>

#include "amore/schema.hpp"
#include "amore/tensor.hpp"

namespace amore::massmap {

constexpr double kDefaultEps = 1e-14;

// Simplex point y (n mass fractions) -> n-1 box coordinates:
//   z_k = y_k / (1 - sum_{i != k, i < n-1} y_i)  for k < n-2 (0-based),  z_{n-2} = y_{n-2}.
// Throws SingularityError when a denominator is <= eps.
std::vector<double> forward_map(const std::vector<double>& y, double eps = kDefaultEps);

// Inverse of forward_map. Solves the (n-2)x(n-2) system
//   d_k + sum_{i != k} z_i d_i = 1 - z_{n-2}
// for d, then y_k = z_k d_k, y_{n-2} = z_{n-2}, y_{n-1} = 1 - sum. The result
// sums to 1 by construction. Throws SingularityError on a singular system and
// ValidationError when z leaves [0, 1].
std::vector<double> inverse_map(const std::vector<double>& z);

enum class Direction { Collapse, Expand };

// Schema of collapsed data: the mass group's first n-1 columns carry z, its
// last column is dropped, and the mass group becomes empty.
StateSchema collapsed_schema(const StateSchema& original);

// Row-wise transform of [..., j] data. Collapse checks every row is on the
// simplex within 1e-6 (ValidationError naming the row). Expand with `clamp`
// first clips z into [0, 1], for surrogate outputs that overshoot slightly.
Tensor collapse(const Tensor& raw, const StateSchema& original);
Tensor expand(const Tensor& collapsed, const StateSchema& original, bool clamp = false);
Tensor batch_transform(const Tensor& data, const StateSchema& original, Direction direction);

}  // namespace amore::massmap
