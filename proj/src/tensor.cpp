#include "amore/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "amore/error.hpp"

namespace amore {

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_numel(shape_)) {
        throw DimensionError("tensor: buffer of " + std::to_string(data_.size()) +
                             " elements does not match shape " + shape_str(shape_));
    }
}

Tensor Tensor::from(Shape shape, std::initializer_list<double> values) {
    return Tensor(std::move(shape), std::vector<double>(values));
}

std::size_t Tensor::dim(std::size_t axis) const {
    if (axis >= shape_.size()) {
        throw DimensionError("tensor: axis " + std::to_string(axis) + " out of range for shape " +
                             shape_str(shape_));
    }
    return shape_[axis];
}

double& Tensor::at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
double Tensor::at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
double& Tensor::at(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
}
double Tensor::at(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
}

double Tensor::item() const {
    if (data_.size() != 1) {
        throw DimensionError("tensor: item() on tensor of shape " + shape_str(shape_));
    }
    return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const& {
    Tensor out = *this;
    return std::move(out).reshaped(std::move(shape));
}

Tensor Tensor::reshaped(Shape shape) && {
    if (shape_numel(shape) != data_.size()) {
        throw DimensionError("reshape: cannot view " + shape_str(shape_) + " as " + shape_str(shape));
    }
    shape_ = std::move(shape);
    return std::move(*this);
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
    if (t.rank() != rank) {
        throw DimensionError(std::string(what) + ": expected rank " + std::to_string(rank) +
                             ", got shape " + shape_str(t.shape()));
    }
}

double frobenius_norm(const Tensor& t) {
    double s = 0.0;
    for (double v : t.data()) s += v * v;
    return std::sqrt(s);
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw DimensionError("max_abs_diff: shapes " + shape_str(a.shape()) + " and " +
                             shape_str(b.shape()) + " differ");
    }
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank(a, 2, "matmul lhs");
    require_rank(b, 2, "matmul rhs");
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k) {
        throw DimensionError("matmul: inner dims " + shape_str(a.shape()) + " x " +
                             shape_str(b.shape()));
    }
    Tensor out({m, n});
    const double* A = a.data().data();
    const double* B = b.data().data();
    double* C = out.data().data();
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = C + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = A[i * k + p];
            const double* brow = B + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
        }
    }
    return out;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
    require_rank(a, 2, "matmul_tn lhs");
    require_rank(b, 2, "matmul_tn rhs");
    const std::size_t k = a.dim(0), m = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k) {
        throw DimensionError("matmul_tn: leading dims " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
    }
    Tensor out({m, n});
    const double* A = a.data().data();
    const double* B = b.data().data();
    double* C = out.data().data();
    for (std::size_t p = 0; p < k; ++p) {
        const double* arow = A + p * m;
        const double* brow = B + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double api = arow[i];
            double* crow = C + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += api * brow[j];
        }
    }
    return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    require_rank(a, 2, "matmul_nt lhs");
    require_rank(b, 2, "matmul_nt rhs");
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
    if (b.dim(1) != k) {
        throw DimensionError("matmul_nt: trailing dims " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
    }
    Tensor out({m, n});
    const double* A = a.data().data();
    const double* B = b.data().data();
    double* C = out.data().data();
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = A + i * k;
        for (std::size_t j = 0; j < n; ++j) {
            const double* brow = B + j * k;
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
            C[i * n + j] = s;
        }
    }
    return out;
}

Tensor transpose(const Tensor& m) {
    require_rank(m, 2, "transpose");
    const std::size_t r = m.dim(0), c = m.dim(1);
    Tensor out({c, r});
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[j * r + i] = m[i * c + j];
    return out;
}

namespace {

void check_axis(const Tensor& x, std::size_t ax, const Tensor& y, std::size_t ay, const char* op,
                const char* xname, const char* yname, const char* axis_name) {
    if (x.dim(ax) != y.dim(ay)) {
        throw DimensionError(std::string(op) + ": axis '" + axis_name + "' mismatch: " + xname +
                             shape_str(x.shape()) + " has " + std::to_string(x.dim(ax)) + ", " +
                             yname + shape_str(y.shape()) + " has " + std::to_string(y.dim(ay)));
    }
}

}  // namespace

Tensor contract_branch_trunk(const Tensor& b, const Tensor& c) {
    require_rank(b, 3, "contract_branch_trunk B");
    require_rank(c, 3, "contract_branch_trunk C");
    check_axis(b, 1, c, 1, "contract_branch_trunk", "B", "C", "j");
    check_axis(b, 2, c, 2, "contract_branch_trunk", "B", "C", "p");
    const std::size_t bs = b.dim(0), j = b.dim(1), p = b.dim(2), nt = c.dim(0);
    Tensor out({bs, nt, j});
    const double* B = b.data().data();
    const double* C = c.data().data();
    double* O = out.data().data();
    for (std::size_t i = 0; i < bs; ++i) {
        for (std::size_t l = 0; l < nt; ++l) {
            for (std::size_t a = 0; a < j; ++a) {
                const double* brow = B + (i * j + a) * p;
                const double* crow = C + (l * j + a) * p;
                double s = 0.0;
                for (std::size_t k = 0; k < p; ++k) s += brow[k] * crow[k];
                O[(i * nt + l) * j + a] = s;
            }
        }
    }
    return out;
}

Tensor contract_trunk_A(const Tensor& c, const Tensor& a) {
    require_rank(c, 3, "contract_trunk_A C");
    require_rank(a, 3, "contract_trunk_A A");
    check_axis(c, 1, a, 0, "contract_trunk_A", "C", "A", "j");
    check_axis(c, 2, a, 1, "contract_trunk_A", "C", "A", "p");
    const std::size_t nt = c.dim(0), j = c.dim(1), p = c.dim(2), bs = a.dim(2);
    Tensor out({bs, nt, j});
    const double* C = c.data().data();
    const double* A = a.data().data();
    double* O = out.data().data();
    for (std::size_t i = 0; i < nt; ++i) {
        for (std::size_t s = 0; s < j; ++s) {
            const double* crow = C + (i * j + s) * p;
            for (std::size_t k = 0; k < p; ++k) {
                const double ck = crow[k];
                const double* arow = A + (s * p + k) * bs;
                for (std::size_t l = 0; l < bs; ++l) O[(l * nt + i) * j + s] += ck * arow[l];
            }
        }
    }
    return out;
}

Tensor contract_predict_2step(const Tensor& b, const Tensor& q) {
    require_rank(b, 3, "contract_predict_2step B");
    require_rank(q, 3, "contract_predict_2step Q");
    check_axis(b, 1, q, 0, "contract_predict_2step", "B", "Q", "j");
    check_axis(b, 2, q, 2, "contract_predict_2step", "B", "Q", "p");
    const std::size_t bs = b.dim(0), j = b.dim(1), p = b.dim(2), nt = q.dim(1);
    Tensor out({bs, nt, j});
    const double* B = b.data().data();
    const double* Q = q.data().data();
    double* O = out.data().data();
    for (std::size_t i = 0; i < bs; ++i) {
        for (std::size_t l = 0; l < nt; ++l) {
            for (std::size_t a = 0; a < j; ++a) {
                const double* brow = B + (i * j + a) * p;
                const double* qrow = Q + (a * nt + l) * p;
                double s = 0.0;
                for (std::size_t k = 0; k < p; ++k) s += brow[k] * qrow[k];
                O[(i * nt + l) * j + a] = s;
            }
        }
    }
    return out;
}

Tensor softmax_last_axis(const Tensor& x) {
    if (x.rank() == 0) return Tensor::scalar(1.0);
    const std::size_t k = x.shape().back();
    Tensor out(x.shape());
    if (k == 0) return out;
    const std::size_t rows = x.size() / k;
    for (std::size_t r = 0; r < rows; ++r) {
        const double* in = x.data().data() + r * k;
        double* o = out.data().data() + r * k;
        const double mx = *std::max_element(in, in + k);
        double s = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            o[i] = std::exp(in[i] - mx);
            s += o[i];
        }
        const double inv = 1.0 / s;
        for (std::size_t i = 0; i < k; ++i) o[i] *= inv;
    }
    return out;
}

}  // namespace amore
