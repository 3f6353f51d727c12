#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "amore/tensor.hpp"

// Reverse-mode automatic differentiation on a dynamic tape. A tape is rebuilt
// for every optimizer step; nodes are appended in evaluation order, which is
// already a topological order, so the backward sweep walks the node list in
// reverse and visits each node once.
namespace amore::ad {

class Tape;

struct Var {
    Tape* tape = nullptr;
    std::size_t id = 0;

    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
};

class Tape {
  public:
    // `self` is the id of the node being differentiated, so rules can read its output.
    using Backward = std::function<void(Tape&, std::size_t self, const Tensor& grad_out)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Differentiable input (a parameter).
    Var leaf(Tensor value);
    // Non-differentiable input (data, frozen weights).
    Var constant(Tensor value);

    const Tensor& value(std::size_t id) const { return nodes_[id].value; }
    bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
    std::size_t size() const noexcept { return nodes_.size(); }

    // Appends an op node. `backward` is only retained when some input requires grad.
    Var push(Tensor value, std::initializer_list<Var> inputs, Backward backward);

    // Adds `g` into the gradient buffer of node `id` (no-op for constants).
    void accumulate(std::size_t id, const Tensor& g);
    void accumulate(std::size_t id, Tensor&& g);

    // dLoss/dParam for each param; parameters the loss does not depend on get zeros.
    // Throws ContractViolation if `loss` is not a single element.
    std::vector<Tensor> grad(Var loss, std::span<const Var> params);

  private:
    struct Node {
        Tensor value;
        bool requires_grad = false;
        Backward backward;
    };
    std::vector<Node> nodes_;
    std::vector<Tensor> grads_;
};

// Elementwise / structural ops. Binary elementwise ops require equal shapes.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
// x [n, m] + bias [m], broadcast over rows.
Var add_bias(Var x, Var bias);
// x * scale + shift with per-last-axis constants (length = trailing extent).
Var affine_last_axis(Var x, const std::vector<double>& scale, const std::vector<double>& shift);
Var tanh(Var a);
Var sin(Var a);
Var exp(Var a);
Var matmul(Var a, Var b);
Var softmax_last_axis(Var a);
Var reshape(Var a, Shape shape);
// Gathers `indices` along `axis` (output extent on that axis = indices.size()).
Var take(Var a, std::size_t axis, const std::vector<std::size_t>& indices);
// Stacks equally shaped operands along a new trailing axis.
Var stack_last_axis(const std::vector<Var>& parts);
// [..., m, n] -> [..., n, m]
Var swap_last_axes(Var a);
Var sum(Var a);
Var mean(Var a);
Var sum_last_axis(Var a);

Var contract_branch_trunk(Var b, Var c);
Var contract_trunk_A(Var c, Var a);
Var contract_predict_2step(Var b, Var q);

// sum_i w_i (pred_i - target_i)^2 with constant target and weights of pred's shape.
Var weighted_squared_error(Var pred, const Tensor& target, const Tensor& weights);

}  // namespace amore::ad
