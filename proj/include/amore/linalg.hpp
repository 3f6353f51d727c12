#pragma once

#include <vector>

#include "amore/tensor.hpp"

namespace amore {

struct QrFactors {
    Tensor q;  // [m,k], orthonormal columns
    Tensor r;  // [k,k], upper triangular, positive diagonal
};

// Thin Householder QR of a full-column-rank M [m,k], m >= k. The diagonal of R is
// made positive so the factorization is unique. Throws SingularBasisError when
// |R_ii| < 1e-12 * ||M||_F for some i.
QrFactors qr_thin(const Tensor& m);

// argmin_X ||M X - Y||_F for M [m,k], Y [m,s], solved through the QR factors.
Tensor least_squares(const Tensor& m, const Tensor& y);

// Solves R X = B for upper-triangular R [k,k], B [k,s].
Tensor solve_upper(const Tensor& r, const Tensor& b);

// Inverse of an upper-triangular matrix.
Tensor invert_upper(const Tensor& r);

// Dense Gaussian elimination with partial pivoting on an n x n row-major
// system. Throws SingularityError if a pivot falls below `pivot_tol`.
std::vector<double> solve_dense(std::vector<double> a, std::vector<double> b, std::size_t n,
                                double pivot_tol = 1e-300);

}  // namespace amore
