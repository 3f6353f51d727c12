#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace amore {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major float64 tensor. Reshape is metadata-only.
class Tensor {
  public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> data);

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape), 0.0); }
    static Tensor ones(Shape shape) { return Tensor(std::move(shape), 1.0); }
    static Tensor scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }
    static Tensor from(Shape shape, std::initializer_list<double> values);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t axis) const;
    std::size_t size() const noexcept { return data_.size(); }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    std::vector<double>& buffer() noexcept { return data_; }
    const std::vector<double>& buffer() const noexcept { return data_; }

    double& operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }

    double& at(std::size_t i, std::size_t j);
    double at(std::size_t i, std::size_t j) const;
    double& at(std::size_t i, std::size_t j, std::size_t k);
    double at(std::size_t i, std::size_t j, std::size_t k) const;

    double item() const;

    Tensor reshaped(Shape shape) const&;
    Tensor reshaped(Shape shape) &&;

    void fill(double v);

  private:
    Shape shape_;
    std::vector<double> data_;
};

// Throws DimensionError naming `what` if `t` does not have rank `rank`.
void require_rank(const Tensor& t, std::size_t rank, const char* what);

double frobenius_norm(const Tensor& t);
double max_abs_diff(const Tensor& a, const Tensor& b);

// [m,k] x [k,n] -> [m,n]
Tensor matmul(const Tensor& a, const Tensor& b);
// a^T b for a [k,m], b [k,n] -> [m,n]
Tensor matmul_tn(const Tensor& a, const Tensor& b);
// a b^T for a [m,k], b [n,k] -> [m,n]
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& m);

// out[i,l,a] = sum_k B[i,a,k] C[l,a,k];  B [bs,j,p], C [n_t1,j,p] -> [bs,n_t1,j]
Tensor contract_branch_trunk(const Tensor& b, const Tensor& c);
// out[l,i,a] = sum_k C[i,a,k] A[a,k,l];  C [n_t1,j,p], A [j,p,bs] -> [bs,n_t1,j]
Tensor contract_trunk_A(const Tensor& c, const Tensor& a);
// out[i,l,a] = sum_k B[i,a,k] Q[a,l,k];  B [bs,j,p], Q [j,n_t1,p] -> [bs,n_t1,j]
Tensor contract_predict_2step(const Tensor& b, const Tensor& q);

// Numerically stabilized softmax along the trailing axis.
Tensor softmax_last_axis(const Tensor& x);

}  // namespace amore
