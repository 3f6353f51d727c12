#include "amore/autodiff.hpp"

#include <cmath>
#include <string>

#include "amore/error.hpp"

namespace amore::ad {

const Tensor& Var::value() const { return tape->value(id); }

Var Tape::leaf(Tensor value) {
    nodes_.push_back(Node{std::move(value), true, {}});
    return Var{this, nodes_.size() - 1};
}

Var Tape::constant(Tensor value) {
    nodes_.push_back(Node{std::move(value), false, {}});
    return Var{this, nodes_.size() - 1};
}

Var Tape::push(Tensor value, std::initializer_list<Var> inputs, Backward backward) {
    bool rg = false;
    for (const Var& v : inputs) {
        if (v.tape != this) throw ContractViolation("autodiff: operands belong to different tapes");
        rg = rg || nodes_[v.id].requires_grad;
    }
    nodes_.push_back(Node{std::move(value), rg, rg ? std::move(backward) : Backward{}});
    return Var{this, nodes_.size() - 1};
}

void Tape::accumulate(std::size_t id, const Tensor& g) {
    if (!nodes_[id].requires_grad) return;
    Tensor& dst = grads_[id];
    if (dst.size() == 0) {
        dst = g;
        return;
    }
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
}

void Tape::accumulate(std::size_t id, Tensor&& g) {
    if (!nodes_[id].requires_grad) return;
    Tensor& dst = grads_[id];
    if (dst.size() == 0) {
        dst = std::move(g);
        return;
    }
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
}

std::vector<Tensor> Tape::grad(Var loss, std::span<const Var> params) {
    if (loss.tape != this) throw ContractViolation("grad: loss belongs to another tape");
    if (nodes_[loss.id].value.size() != 1) {
        throw ContractViolation("grad: loss must be a scalar, got shape " +
                                shape_str(nodes_[loss.id].value.shape()));
    }
    grads_.assign(nodes_.size(), Tensor{});
    if (nodes_[loss.id].requires_grad) {
        grads_[loss.id] = Tensor(nodes_[loss.id].value.shape(), 1.0);
        for (std::size_t id = loss.id + 1; id-- > 0;) {
            Node& n = nodes_[id];
            if (!n.backward || grads_[id].size() == 0) continue;
            // Rules only write to earlier nodes, so the buffer can be moved out.
            const Tensor g = std::move(grads_[id]);
            grads_[id] = Tensor{};
            n.backward(*this, id, g);
        }
    }
    std::vector<Tensor> out;
    out.reserve(params.size());
    for (const Var& p : params) {
        const Shape& shp = nodes_[p.id].value.shape();
        if (grads_[p.id].size() == 0) {
            out.emplace_back(shp, 0.0);
        } else {
            out.push_back(std::move(grads_[p.id]).reshaped(shp));
        }
    }
    grads_.clear();
    return out;
}

namespace {

void require_same(const Var& a, const Var& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shapes " + shape_str(a.shape()) + " and " +
                             shape_str(b.shape()) + " differ");
    }
}

template <class F>
Var unary(Var a, F&& f, Tape::Backward bw) {
    Tensor out = a.value();
    for (double& v : out.data()) v = f(v);
    return a.tape->push(std::move(out), {a}, std::move(bw));
}

}  // namespace

Var add(Var a, Var b) {
    require_same(a, b, "add");
    Tensor out = a.value();
    const Tensor& bv = b.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
    const auto ia = a.id, ib = b.id;
    return a.tape->push(std::move(out), {a, b}, [ia, ib](Tape& t, std::size_t, const Tensor& g) {
        t.accumulate(ia, g);
        t.accumulate(ib, g);
    });
}

Var sub(Var a, Var b) {
    require_same(a, b, "sub");
    Tensor out = a.value();
    const Tensor& bv = b.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
    const auto ia = a.id, ib = b.id;
    return a.tape->push(std::move(out), {a, b}, [ia, ib](Tape& t, std::size_t, const Tensor& g) {
        t.accumulate(ia, g);
        if (t.requires_grad(ib)) {
            Tensor neg = g;
            for (double& v : neg.data()) v = -v;
            t.accumulate(ib, std::move(neg));
        }
    });
}

Var mul(Var a, Var b) {
    require_same(a, b, "mul");
    Tensor out = a.value();
    const Tensor& bv = b.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
    const auto ia = a.id, ib = b.id;
    return a.tape->push(std::move(out), {a, b}, [ia, ib](Tape& t, std::size_t, const Tensor& g) {
        if (t.requires_grad(ia)) {
            Tensor ga = g;
            const Tensor& bv = t.value(ib);
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] *= bv[i];
            t.accumulate(ia, std::move(ga));
        }
        if (t.requires_grad(ib)) {
            Tensor gb = g;
            const Tensor& av = t.value(ia);
            for (std::size_t i = 0; i < gb.size(); ++i) gb[i] *= av[i];
            t.accumulate(ib, std::move(gb));
        }
    });
}

Var scale(Var a, double s) {
    const auto ia = a.id;
    return unary(a, [s](double v) { return v * s; },
                 [ia, s](Tape& t, std::size_t, const Tensor& g) {
                     Tensor ga = g;
                     for (double& v : ga.data()) v *= s;
                     t.accumulate(ia, std::move(ga));
                 });
}

Var add_scalar(Var a, double s) {
    const auto ia = a.id;
    return unary(a, [s](double v) { return v + s; },
                 [ia](Tape& t, std::size_t, const Tensor& g) { t.accumulate(ia, g); });
}

Var add_bias(Var x, Var bias) {
    const Tensor& xv = x.value();
    const Tensor& bv = bias.value();
    require_rank(xv, 2, "add_bias x");
    const std::size_t n = xv.dim(0), m = xv.dim(1);
    if (bv.size() != m) {
        throw DimensionError("add_bias: bias " + shape_str(bv.shape()) + " vs x " +
                             shape_str(xv.shape()));
    }
    Tensor out = xv;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) out[i * m + j] += bv[j];
    const auto ix = x.id, ib = bias.id;
    return x.tape->push(std::move(out), {x, bias},
                        [ix, ib, n, m](Tape& t, std::size_t, const Tensor& g) {
                            t.accumulate(ix, g);
                            if (t.requires_grad(ib)) {
                                Tensor gb(t.value(ib).shape());
                                for (std::size_t i = 0; i < n; ++i)
                                    for (std::size_t j = 0; j < m; ++j) gb[j] += g[i * m + j];
                                t.accumulate(ib, std::move(gb));
                            }
                        });
}

Var affine_last_axis(Var x, const std::vector<double>& scl, const std::vector<double>& shift) {
    const Tensor& xv = x.value();
    const std::size_t k = xv.rank() ? xv.shape().back() : 1;
    if (scl.size() != k || shift.size() != k) {
        throw DimensionError("affine_last_axis: coefficients do not match trailing axis of " +
                             shape_str(xv.shape()));
    }
    Tensor out = xv;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = out[i] * scl[i % k] + shift[i % k];
    const auto ix = x.id;
    return x.tape->push(std::move(out), {x}, [ix, scl, k](Tape& t, std::size_t, const Tensor& g) {
        Tensor gx = g;
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] *= scl[i % k];
        t.accumulate(ix, std::move(gx));
    });
}

Var tanh(Var a) {
    const auto ia = a.id;
    return unary(a, [](double v) { return std::tanh(v); },
                 [ia](Tape& t, std::size_t self, const Tensor& g) {
                     const Tensor& y = t.value(self);
                     Tensor ga = g;
                     for (std::size_t i = 0; i < ga.size(); ++i) ga[i] *= 1.0 - y[i] * y[i];
                     t.accumulate(ia, std::move(ga));
                 });
}

Var sin(Var a) {
    const auto ia = a.id;
    return unary(a, [](double v) { return std::sin(v); },
                 [ia](Tape& t, std::size_t, const Tensor& g) {
                     const Tensor& x = t.value(ia);
                     Tensor ga = g;
                     for (std::size_t i = 0; i < ga.size(); ++i) ga[i] *= std::cos(x[i]);
                     t.accumulate(ia, std::move(ga));
                 });
}

Var exp(Var a) {
    const auto ia = a.id;
    return unary(a, [](double v) { return std::exp(v); },
                 [ia](Tape& t, std::size_t self, const Tensor& g) {
                     const Tensor& y = t.value(self);
                     Tensor ga = g;
                     for (std::size_t i = 0; i < ga.size(); ++i) ga[i] *= y[i];
                     t.accumulate(ia, std::move(ga));
                 });
}

Var matmul(Var a, Var b) {
    Tensor out = amore::matmul(a.value(), b.value());
    const auto ia = a.id, ib = b.id;
    return a.tape->push(std::move(out), {a, b}, [ia, ib](Tape& t, std::size_t, const Tensor& g) {
        if (t.requires_grad(ia)) t.accumulate(ia, amore::matmul_nt(g, t.value(ib)));
        if (t.requires_grad(ib)) t.accumulate(ib, amore::matmul_tn(t.value(ia), g));
    });
}

Var softmax_last_axis(Var a) {
    Tensor out = amore::softmax_last_axis(a.value());
    const auto ia = a.id;
    return a.tape->push(std::move(out), {a}, [ia](Tape& t, std::size_t self, const Tensor& g) {
        const Tensor& y = t.value(self);
        const std::size_t k = y.rank() ? y.shape().back() : 1;
        Tensor ga(y.shape());
        for (std::size_t r = 0; r < y.size() / k; ++r) {
            double dot = 0.0;
            for (std::size_t i = 0; i < k; ++i) dot += g[r * k + i] * y[r * k + i];
            for (std::size_t i = 0; i < k; ++i) ga[r * k + i] = y[r * k + i] * (g[r * k + i] - dot);
        }
        t.accumulate(ia, std::move(ga));
    });
}

Var reshape(Var a, Shape shape) {
    Tensor out = a.value().reshaped(std::move(shape));
    const auto ia = a.id;
    return a.tape->push(std::move(out), {a}, [ia](Tape& t, std::size_t, const Tensor& g) {
        t.accumulate(ia, g.reshaped(t.value(ia).shape()));
    });
}

Var take(Var a, std::size_t axis, const std::vector<std::size_t>& indices) {
    const Tensor& av = a.value();
    const Shape& in_shape = av.shape();
    if (axis >= in_shape.size()) {
        throw DimensionError("take: axis " + std::to_string(axis) + " out of range for " +
                             shape_str(in_shape));
    }
    std::size_t outer = 1, inner = 1;
    for (std::size_t d = 0; d < axis; ++d) outer *= in_shape[d];
    for (std::size_t d = axis + 1; d < in_shape.size(); ++d) inner *= in_shape[d];
    const std::size_t extent = in_shape[axis];
    for (auto ix : indices) {
        if (ix >= extent) throw DimensionError("take: index out of range on axis " + std::to_string(axis));
    }
    Shape out_shape = in_shape;
    out_shape[axis] = indices.size();
    Tensor out(out_shape);
    const std::size_t n = indices.size();
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t i = 0; i < n; ++i) {
            const double* src = av.data().data() + (o * extent + indices[i]) * inner;
            double* dst = out.data().data() + (o * n + i) * inner;
            std::copy(src, src + inner, dst);
        }
    const auto ia = a.id;
    return a.tape->push(std::move(out), {a},
                        [ia, indices, outer, inner, extent](Tape& t, std::size_t, const Tensor& g) {
                            Tensor ga(t.value(ia).shape());
                            const std::size_t n = indices.size();
                            for (std::size_t o = 0; o < outer; ++o)
                                for (std::size_t i = 0; i < n; ++i) {
                                    const double* src = g.data().data() + (o * n + i) * inner;
                                    double* dst = ga.data().data() + (o * extent + indices[i]) * inner;
                                    for (std::size_t q = 0; q < inner; ++q) dst[q] += src[q];
                                }
                            t.accumulate(ia, std::move(ga));
                        });
}

Var stack_last_axis(const std::vector<Var>& parts) {
    if (parts.empty()) throw DimensionError("stack_last_axis: no operands");
    Tape* tape = parts.front().tape;
    const Shape& base = parts.front().shape();
    for (const Var& v : parts) {
        if (v.tape != tape) throw ContractViolation("stack_last_axis: operands on different tapes");
        if (v.shape() != base) {
            throw DimensionError("stack_last_axis: shapes " + shape_str(base) + " and " +
                                 shape_str(v.shape()) + " differ");
        }
    }
    const std::size_t k = parts.size();
    const std::size_t n = shape_numel(base);
    Shape out_shape = base;
    out_shape.push_back(k);
    Tensor out(out_shape);
    for (std::size_t c = 0; c < k; ++c) {
        const Tensor& v = parts[c].value();
        for (std::size_t i = 0; i < n; ++i) out[i * k + c] = v[i];
    }
    std::vector<std::size_t> ids;
    for (const Var& v : parts) ids.push_back(v.id);
    Tape::Backward bw = [ids, n, k](Tape& t, std::size_t, const Tensor& g) {
        for (std::size_t c = 0; c < k; ++c) {
            if (!t.requires_grad(ids[c])) continue;
            Tensor gc(t.value(ids[c]).shape());
            for (std::size_t i = 0; i < n; ++i) gc[i] = g[i * k + c];
            t.accumulate(ids[c], std::move(gc));
        }
    };
    // push() takes a fixed-arity input list; any differentiable operand marks the node.
    Var rep = parts.front();
    for (const Var& v : parts)
        if (tape->requires_grad(v.id)) rep = v;
    return tape->push(std::move(out), {rep}, std::move(bw));
}

Var swap_last_axes(Var a) {
    const Tensor& av = a.value();
    if (av.rank() < 2) throw DimensionError("swap_last_axes: rank < 2");
    const std::size_t m = av.shape()[av.rank() - 2], n = av.shape().back();
    const std::size_t outer = av.size() / (m * n);
    Shape out_shape = av.shape();
    std::swap(out_shape[av.rank() - 2], out_shape[av.rank() - 1]);
    Tensor out(out_shape);
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) out[o * m * n + j * m + i] = av[o * m * n + i * n + j];
    const auto ia = a.id;
    return a.tape->push(std::move(out), {a}, [ia, outer, m, n](Tape& t, std::size_t, const Tensor& g) {
        Tensor ga(t.value(ia).shape());
        for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) ga[o * m * n + i * n + j] = g[o * m * n + j * m + i];
        t.accumulate(ia, std::move(ga));
    });
}

Var sum(Var a) {
    double s = 0.0;
    for (double v : a.value().data()) s += v;
    const auto ia = a.id;
    return a.tape->push(Tensor::scalar(s), {a}, [ia](Tape& t, std::size_t, const Tensor& g) {
        t.accumulate(ia, Tensor(t.value(ia).shape(), g[0]));
    });
}

Var mean(Var a) {
    const double n = static_cast<double>(a.value().size());
    return scale(sum(a), 1.0 / n);
}

Var sum_last_axis(Var a) {
    const Tensor& av = a.value();
    if (av.rank() == 0) throw DimensionError("sum_last_axis: scalar input");
    const std::size_t k = av.shape().back();
    Shape out_shape(av.shape().begin(), av.shape().end() - 1);
    Tensor out(out_shape);
    for (std::size_t r = 0; r < out.size(); ++r) {
        double s = 0.0;
        for (std::size_t i = 0; i < k; ++i) s += av[r * k + i];
        out[r] = s;
    }
    const auto ia = a.id;
    return a.tape->push(std::move(out), {a}, [ia, k](Tape& t, std::size_t, const Tensor& g) {
        Tensor ga(t.value(ia).shape());
        for (std::size_t r = 0; r < g.size(); ++r)
            for (std::size_t i = 0; i < k; ++i) ga[r * k + i] = g[r];
        t.accumulate(ia, std::move(ga));
    });
}

Var contract_branch_trunk(Var b, Var c) {
    Tensor out = amore::contract_branch_trunk(b.value(), c.value());
    const auto ib = b.id, ic = c.id;
    return b.tape->push(std::move(out), {b, c}, [ib, ic](Tape& t, std::size_t, const Tensor& g) {
        const Tensor& B = t.value(ib);
        const Tensor& C = t.value(ic);
        const std::size_t bs = B.dim(0), j = B.dim(1), p = B.dim(2), nt = C.dim(0);
        if (t.requires_grad(ib)) {
            Tensor gb(B.shape());
            for (std::size_t i = 0; i < bs; ++i)
                for (std::size_t l = 0; l < nt; ++l)
                    for (std::size_t a = 0; a < j; ++a) {
                        const double gv = g[(i * nt + l) * j + a];
                        const double* crow = C.data().data() + (l * j + a) * p;
                        double* dst = gb.data().data() + (i * j + a) * p;
                        for (std::size_t k = 0; k < p; ++k) dst[k] += gv * crow[k];
                    }
            t.accumulate(ib, std::move(gb));
        }
        if (t.requires_grad(ic)) {
            Tensor gc(C.shape());
            for (std::size_t i = 0; i < bs; ++i)
                for (std::size_t l = 0; l < nt; ++l)
                    for (std::size_t a = 0; a < j; ++a) {
                        const double gv = g[(i * nt + l) * j + a];
                        const double* brow = B.data().data() + (i * j + a) * p;
                        double* dst = gc.data().data() + (l * j + a) * p;
                        for (std::size_t k = 0; k < p; ++k) dst[k] += gv * brow[k];
                    }
            t.accumulate(ic, std::move(gc));
        }
    });
}

Var contract_trunk_A(Var c, Var a) {
    Tensor out = amore::contract_trunk_A(c.value(), a.value());
    const auto ic = c.id, ia = a.id;
    return c.tape->push(std::move(out), {c, a}, [ic, ia](Tape& t, std::size_t, const Tensor& g) {
        const Tensor& C = t.value(ic);
        const Tensor& A = t.value(ia);
        const std::size_t nt = C.dim(0), j = C.dim(1), p = C.dim(2), bs = A.dim(2);
        // g[l,i,s]: sample l, time i, state s.
        if (t.requires_grad(ic)) {
            Tensor gc(C.shape());
            for (std::size_t i = 0; i < nt; ++i)
                for (std::size_t s = 0; s < j; ++s)
                    for (std::size_t k = 0; k < p; ++k) {
                        const double* arow = A.data().data() + (s * p + k) * bs;
                        double acc = 0.0;
                        for (std::size_t l = 0; l < bs; ++l) acc += g[(l * nt + i) * j + s] * arow[l];
                        gc[(i * j + s) * p + k] = acc;
                    }
            t.accumulate(ic, std::move(gc));
        }
        if (t.requires_grad(ia)) {
            Tensor ga(A.shape());
            for (std::size_t i = 0; i < nt; ++i)
                for (std::size_t s = 0; s < j; ++s)
                    for (std::size_t k = 0; k < p; ++k) {
                        const double ck = C[(i * j + s) * p + k];
                        double* dst = ga.data().data() + (s * p + k) * bs;
                        for (std::size_t l = 0; l < bs; ++l) dst[l] += g[(l * nt + i) * j + s] * ck;
                    }
            t.accumulate(ia, std::move(ga));
        }
    });
}

Var contract_predict_2step(Var b, Var q) {
    Tensor out = amore::contract_predict_2step(b.value(), q.value());
    const auto ib = b.id, iq = q.id;
    return b.tape->push(std::move(out), {b, q}, [ib, iq](Tape& t, std::size_t, const Tensor& g) {
        const Tensor& B = t.value(ib);
        const Tensor& Q = t.value(iq);
        const std::size_t bs = B.dim(0), j = B.dim(1), p = B.dim(2), nt = Q.dim(1);
        if (t.requires_grad(ib)) {
            Tensor gb(B.shape());
            for (std::size_t i = 0; i < bs; ++i)
                for (std::size_t l = 0; l < nt; ++l)
                    for (std::size_t a = 0; a < j; ++a) {
                        const double gv = g[(i * nt + l) * j + a];
                        const double* qrow = Q.data().data() + (a * nt + l) * p;
                        double* dst = gb.data().data() + (i * j + a) * p;
                        for (std::size_t k = 0; k < p; ++k) dst[k] += gv * qrow[k];
                    }
            t.accumulate(ib, std::move(gb));
        }
        if (t.requires_grad(iq)) {
            Tensor gq(Q.shape());
            for (std::size_t i = 0; i < bs; ++i)
                for (std::size_t l = 0; l < nt; ++l)
                    for (std::size_t a = 0; a < j; ++a) {
                        const double gv = g[(i * nt + l) * j + a];
                        const double* brow = B.data().data() + (i * j + a) * p;
                        double* dst = gq.data().data() + (a * nt + l) * p;
                        for (std::size_t k = 0; k < p; ++k) dst[k] += gv * brow[k];
                    }
            t.accumulate(iq, std::move(gq));
        }
    });
}

Var weighted_squared_error(Var pred, const Tensor& target, const Tensor& weights) {
    const Tensor& pv = pred.value();
    if (target.shape() != pv.shape() || weights.shape() != pv.shape()) {
        throw DimensionError("weighted_squared_error: pred " + shape_str(pv.shape()) + ", target " +
                             shape_str(target.shape()) + ", weights " + shape_str(weights.shape()));
    }
    double s = 0.0;
    for (std::size_t i = 0; i < pv.size(); ++i) {
        const double d = pv[i] - target[i];
        s += weights[i] * d * d;
    }
    const auto ip = pred.id;
    return pred.tape->push(Tensor::scalar(s), {pred},
                           [ip, target, weights](Tape& t, std::size_t, const Tensor& g) {
                               const Tensor& pv = t.value(ip);
                               Tensor gp(pv.shape());
                               const double g0 = 2.0 * g[0];
                               for (std::size_t i = 0; i < pv.size(); ++i)
                                   gp[i] = g0 * weights[i] * (pv[i] - target[i]);
                               t.accumulate(ip, std::move(gp));
                           });
}

}  // namespace amore::ad
