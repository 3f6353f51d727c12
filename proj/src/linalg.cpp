#include "amore/linalg.hpp"

#include <cmath>
#include <string>

#include "amore/error.hpp"

namespace amore {

QrFactors qr_thin(const Tensor& mat) {
    require_rank(mat, 2, "qr_thin");
    const std::size_t m = mat.dim(0), k = mat.dim(1);
    if (m < k) {
        throw DimensionError("qr_thin: need rows >= cols, got " + shape_str(mat.shape()));
    }
    const double scale = frobenius_norm(mat);
    // Work on a column-major copy so each Householder vector is contiguous.
    std::vector<double> a(m * k);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < k; ++j) a[j * m + i] = mat[i * k + j];

    std::vector<std::vector<double>> reflectors(k);
    std::vector<double> rdiag(k);
    for (std::size_t j = 0; j < k; ++j) {
        double* col = a.data() + j * m;
        double norm = 0.0;
        for (std::size_t i = j; i < m; ++i) norm += col[i] * col[i];
        norm = std::sqrt(norm);
        if (norm <= 1e-12 * scale || norm == 0.0) {
            throw SingularBasisError("qr_thin: column " + std::to_string(j) +
                                     " is linearly dependent (|R_jj| = " + std::to_string(norm) +
                                     ")");
        }
        const double alpha = col[j] > 0 ? -norm : norm;
        std::vector<double> v(col + j, col + m);
        v[0] -= alpha;
        double vnorm2 = 0.0;
        for (double x : v) vnorm2 += x * x;
        if (vnorm2 > 0.0) {
            // Apply H = I - 2 v v^T / (v^T v) to the trailing columns.
            for (std::size_t c = j; c < k; ++c) {
                double* cc = a.data() + c * m + j;
                double dot = 0.0;
                for (std::size_t i = 0; i < v.size(); ++i) dot += v[i] * cc[i];
                const double f = 2.0 * dot / vnorm2;
                for (std::size_t i = 0; i < v.size(); ++i) cc[i] -= f * v[i];
            }
        }
        rdiag[j] = col[j];
        reflectors[j] = std::move(v);
    }

    QrFactors out{Tensor({m, k}), Tensor({k, k})};
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = i; j < k; ++j) out.r[i * k + j] = a[j * m + i];

    // Q = H_0 H_1 ... H_{k-1} applied to the first k columns of the identity.
    std::vector<double> q(m * k, 0.0);  // column-major
    for (std::size_t j = 0; j < k; ++j) q[j * m + j] = 1.0;
    for (std::size_t jj = k; jj-- > 0;) {
        const auto& v = reflectors[jj];
        double vnorm2 = 0.0;
        for (double x : v) vnorm2 += x * x;
        if (vnorm2 == 0.0) continue;
        for (std::size_t c = 0; c < k; ++c) {
            double* cc = q.data() + c * m + jj;
            double dot = 0.0;
            for (std::size_t i = 0; i < v.size(); ++i) dot += v[i] * cc[i];
            const double f = 2.0 * dot / vnorm2;
            for (std::size_t i = 0; i < v.size(); ++i) cc[i] -= f * v[i];
        }
    }

    // Sign normalization: flip row i of R and column i of Q when R_ii < 0.
    for (std::size_t i = 0; i < k; ++i) {
        const double sign = out.r[i * k + i] < 0 ? -1.0 : 1.0;
        for (std::size_t j = i; j < k; ++j) out.r[i * k + j] *= sign;
        for (std::size_t r = 0; r < m; ++r) out.q[r * k + i] = sign * q[i * m + r];
        if (std::abs(out.r[i * k + i]) < 1e-12 * scale) {
            throw SingularBasisError("qr_thin: rank deficient at column " + std::to_string(i));
        }
    }
    return out;
}

Tensor solve_upper(const Tensor& r, const Tensor& b) {
    require_rank(r, 2, "solve_upper R");
    require_rank(b, 2, "solve_upper B");
    const std::size_t k = r.dim(0), s = b.dim(1);
    if (r.dim(1) != k || b.dim(0) != k) {
        throw DimensionError("solve_upper: R" + shape_str(r.shape()) + " B" + shape_str(b.shape()));
    }
    Tensor x = b;
    for (std::size_t ii = k; ii-- > 0;) {
        const double d = r[ii * k + ii];
        if (d == 0.0) throw SingularBasisError("solve_upper: zero diagonal");
        for (std::size_t c = 0; c < s; ++c) {
            double acc = x[ii * s + c];
            for (std::size_t j = ii + 1; j < k; ++j) acc -= r[ii * k + j] * x[j * s + c];
            x[ii * s + c] = acc / d;
        }
    }
    return x;
}

Tensor invert_upper(const Tensor& r) {
    const std::size_t k = r.dim(0);
    Tensor eye({k, k});
    for (std::size_t i = 0; i < k; ++i) eye[i * k + i] = 1.0;
    return solve_upper(r, eye);
}

Tensor least_squares(const Tensor& m, const Tensor& y) {
    require_rank(m, 2, "least_squares M");
    require_rank(y, 2, "least_squares Y");
    if (m.dim(0) != y.dim(0)) {
        throw DimensionError("least_squares: row mismatch M" + shape_str(m.shape()) + " Y" +
                             shape_str(y.shape()));
    }
    const QrFactors f = qr_thin(m);
    return solve_upper(f.r, matmul_tn(f.q, y));
}

std::vector<double> solve_dense(std::vector<double> a, std::vector<double> b, std::size_t n,
                                double pivot_tol) {
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r * n + col]) > std::abs(a[piv * n + col])) piv = r;
        if (!(std::abs(a[piv * n + col]) > pivot_tol)) {
            throw SingularityError("solve_dense: singular matrix at column " + std::to_string(col));
        }
        if (piv != col) {
            for (std::size_t c = 0; c < n; ++c) std::swap(a[col * n + c], a[piv * n + c]);
            std::swap(b[col], b[piv]);
        }
        const double inv = 1.0 / a[col * n + col];
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a[r * n + col] * inv;
            if (f == 0.0) continue;
            for (std::size_t c = col; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
            b[r] -= f * b[col];
        }
    }
    for (std::size_t ii = n; ii-- > 0;) {
        double acc = b[ii];
        for (std::size_t c = ii + 1; c < n; ++c) acc -= a[ii * n + c] * b[c];
        b[ii] = acc / a[ii * n + ii];
    }
    return b;
}

}  // namespace amore
