#include "amore/massmap.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "amore/error.hpp"
#include "amore/linalg.hpp"

namespace amore::massmap {

std::vector<double> forward_map(const std::vector<double>& y, double eps) {
    const std::size_t n = y.size();
    if (n < 2) throw ConfigError("mass map: need at least two species");
    std::vector<double> z(n - 1);
    double head = 0.0;  // sum of y_0 .. y_{n-2}
    for (std::size_t i = 0; i + 1 < n; ++i) head += y[i];
    for (std::size_t k = 0; k + 2 < n; ++k) {
        const double denom = 1.0 - (head - y[k]);
        if (denom <= eps) {
            throw SingularityError("mass map: collapsed coordinate " + std::to_string(k) +
                                   " is singular (denominator " + std::to_string(denom) + ")");
        }
        z[k] = y[k] / denom;
    }
    z[n - 2] = y[n - 2];
    return z;
}

std::vector<double> inverse_map(const std::vector<double>& z) {
    const std::size_t m = z.size();  // n - 1
    if (m < 1) throw ConfigError("mass map: need at least one collapsed coordinate");
    for (double v : z) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw ValidationError("mass map: collapsed coordinate " + std::to_string(v) +
                                  " outside [0, 1]");
        }
    }
    const std::size_t r = m - 1;  // system size n - 2
    std::vector<double> y(m + 1);
    y[m - 1] = z[m - 1];
    if (r > 0) {
        std::vector<double> a(r * r), b(r, 1.0 - z[m - 1]);
        for (std::size_t k = 0; k < r; ++k)
            for (std::size_t i = 0; i < r; ++i) a[k * r + i] = k == i ? 1.0 : z[i];
        std::vector<double> d;
        try {
            d = solve_dense(std::move(a), std::move(b), r, 1e-14);
        } catch (const SingularityError&) {
            throw SingularityError("mass map: degenerate collapsed coordinates");
        }
        for (std::size_t k = 0; k < r; ++k) y[k] = z[k] * d[k];
    }
    double head = 0.0;
    for (std::size_t i = 0; i < m; ++i) head += y[i];
    y[m] = 1.0 - head;
    return y;
}

namespace {

void require_group(const StateSchema& s) {
    if (s.mass_group.empty()) throw ConfigError("mass map: schema has an empty mass group");
    if (s.mass_group.size() < 2) throw ConfigError("mass map: mass group needs two or more species");
}

// Columns of the original schema that survive collapse, in order.
std::vector<std::size_t> kept_columns(const StateSchema& s) {
    std::vector<std::size_t> keep;
    for (std::size_t a = 0; a < s.size(); ++a)
        if (a != s.mass_group.back()) keep.push_back(a);
    return keep;
}

}  // namespace

StateSchema collapsed_schema(const StateSchema& original) {
    original.validate();
    require_group(original);
    StateSchema out;
    std::set<std::size_t> group(original.mass_group.begin(), original.mass_group.end() - 1);
    for (auto a : kept_columns(original)) {
        out.names.push_back(group.count(a) ? "z(" + original.names[a] + ")" : original.names[a]);
        out.log_transform.push_back(original.log_transform[a]);
        if (original.temperature_index && *original.temperature_index == a) {
            out.temperature_index = out.names.size() - 1;
        }
    }
    return out;
}

Tensor collapse(const Tensor& raw, const StateSchema& original) {
    original.validate();
    require_group(original);
    const std::size_t j = original.size();
    if (raw.rank() == 0 || raw.shape().back() != j) {
        throw DimensionError("mass map: data " + shape_str(raw.shape()) + " does not have " +
                             std::to_string(j) + " states");
    }
    const auto keep = kept_columns(original);
    const auto& group = original.mass_group;
    Shape shape = raw.shape();
    shape.back() = j - 1;
    Tensor out(shape);
    const std::size_t rows = raw.size() / j;
    std::vector<double> y(group.size());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* in = raw.data().data() + r * j;
        double sum = 0.0;
        for (std::size_t g = 0; g < group.size(); ++g) {
            y[g] = in[group[g]];
            sum += y[g];
        }
        if (std::abs(sum - 1.0) > 1e-6) {
            throw ValidationError("mass map: row " + std::to_string(r) +
                                  " is off the simplex (sum " + std::to_string(sum) + ")");
        }
        const auto z = forward_map(y);
        std::vector<double> row(in, in + j);
        for (std::size_t g = 0; g + 1 < group.size(); ++g) row[group[g]] = z[g];
        for (std::size_t c = 0; c < keep.size(); ++c) out[r * (j - 1) + c] = row[keep[c]];
    }
    return out;
}

Tensor expand(const Tensor& collapsed, const StateSchema& original, bool clamp) {
    original.validate();
    require_group(original);
    const std::size_t j = original.size();
    if (collapsed.rank() == 0 || collapsed.shape().back() != j - 1) {
        throw DimensionError("mass map: collapsed data " + shape_str(collapsed.shape()) +
                             " does not have " + std::to_string(j - 1) + " states");
    }
    const auto keep = kept_columns(original);
    const auto& group = original.mass_group;
    Shape shape = collapsed.shape();
    shape.back() = j;
    Tensor out(shape);
    const std::size_t rows = collapsed.size() / (j - 1);
    std::vector<double> z(group.size() - 1);
    for (std::size_t r = 0; r < rows; ++r) {
        std::vector<double> row(j, 0.0);
        for (std::size_t c = 0; c < keep.size(); ++c) row[keep[c]] = collapsed[r * (j - 1) + c];
        for (std::size_t g = 0; g + 1 < group.size(); ++g) {
            z[g] = row[group[g]];
            if (clamp) z[g] = std::clamp(z[g], 0.0, 1.0);
        }
        const auto y = inverse_map(z);
        for (std::size_t g = 0; g < group.size(); ++g) row[group[g]] = y[g];
        std::copy(row.begin(), row.end(), out.data().begin() + r * j);
    }
    return out;
}

Tensor batch_transform(const Tensor& data, const StateSchema& original, Direction direction) {
    return direction == Direction::Collapse ? collapse(data, original) : expand(data, original);
}

}  // namespace amore::massmap
