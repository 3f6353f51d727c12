#include "amore/networks.hpp"

#include <cmath>
#include <sstream>

#include "amore/error.hpp"

namespace amore::nn {

namespace {

struct JacobiCoeffs {
    double a1, a2, a3, a4;
};

JacobiCoeffs jacobi_coeffs(std::size_t n_, double a, double b) {
    const double n = static_cast<double>(n_);
    const double s = 2.0 * n + a + b;
    return {2.0 * (n + 1.0) * (n + a + b + 1.0) * s, (s + 1.0) * (a * a - b * b),
            s * (s + 1.0) * (s + 2.0), 2.0 * (n + a) * (n + b) * (s + 2.0)};
}

constexpr double kDomainSlack = 1e-12;

void check_domain(const Tensor& x) {
    for (double v : x.data()) {
        if (!(std::abs(v) <= 1.0 + kDomainSlack)) {
            throw ContractViolation("jacobi_basis: input " + std::to_string(v) + " outside [-1,1]");
        }
    }
}

ad::Var activate(ad::Var x, Activation act) {
    return act == Activation::Tanh ? ad::tanh(x) : ad::sin(x);
}

}  // namespace

Tensor jacobi_basis(const Tensor& x, std::size_t order, double alpha, double beta) {
    check_domain(x);
    const std::size_t k = order + 1;
    Shape shape = x.shape();
    shape.push_back(k);
    Tensor out(shape);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double xv = x[i];
        double prev = 1.0;
        out[i * k] = prev;
        if (order == 0) continue;
        double cur = 0.5 * ((alpha - beta) + (alpha + beta + 2.0) * xv);
        out[i * k + 1] = cur;
        for (std::size_t n = 1; n < order; ++n) {
            const auto c = jacobi_coeffs(n, alpha, beta);
            const double next = ((c.a2 + c.a3 * xv) * cur - c.a4 * prev) / c.a1;
            prev = cur;
            cur = next;
            out[i * k + n + 1] = cur;
        }
    }
    return out;
}

ad::Var jacobi_basis(ad::Var x, std::size_t order, double alpha, double beta) {
    check_domain(x.value());
    ad::Tape& tape = *x.tape;
    std::vector<ad::Var> polys;
    polys.push_back(tape.constant(Tensor(x.shape(), 1.0)));
    if (order >= 1) {
        polys.push_back(
            ad::add_scalar(ad::scale(x, 0.5 * (alpha + beta + 2.0)), 0.5 * (alpha - beta)));
    }
    for (std::size_t n = 1; n < order; ++n) {
        const auto c = jacobi_coeffs(n, alpha, beta);
        ad::Var lin = ad::add_scalar(ad::scale(x, c.a3 / c.a1), c.a2 / c.a1);
        ad::Var next = ad::sub(ad::mul(lin, polys[n]), ad::scale(polys[n - 1], c.a4 / c.a1));
        polys.push_back(next);
    }
    return ad::stack_last_axis(polys);
}

Network::Network(NetworkConfig cfg) : cfg_(std::move(cfg)) {
    if (const auto* r = std::get_if<ResNetConfig>(&cfg_)) {
        if (r->num_hidden_layers == 0 || r->num_hidden_layers % 2 != 0) {
            throw ConfigError("resnet: num_hidden_layers must be a positive even number, got " +
                              std::to_string(r->num_hidden_layers));
        }
        if (r->input_dim == 0 || r->hidden_width == 0 || r->output_dim == 0) {
            throw ConfigError("resnet: dimensions must be positive");
        }
        const std::size_t h = r->hidden_width;
        has_projection_ = r->input_dim != h;
        if (has_projection_) {
            specs_.push_back({"proj.W", {r->input_dim, h}});
            specs_.push_back({"proj.b", {h}});
        }
        for (std::size_t blk = 0; blk < r->num_hidden_layers / 2; ++blk) {
            const std::size_t in = blk == 0 ? r->input_dim : h;
            const std::string p = "block" + std::to_string(blk) + ".";
            specs_.push_back({p + "W1", {in, h}});
            specs_.push_back({p + "b1", {h}});
            specs_.push_back({p + "W2", {h, h}});
            specs_.push_back({p + "b2", {h}});
        }
        specs_.push_back({"out.W", {h, r->output_dim}});
        specs_.push_back({"out.b", {r->output_dim}});
    } else {
        const auto& k = std::get<KanConfig>(cfg_);
        if (k.layer_dims.size() < 2) throw ConfigError("kan: need at least two layer dims");
        for (auto d : k.layer_dims)
            if (d == 0) throw ConfigError("kan: layer dims must be positive");
        for (std::size_t i = 0; i + 1 < k.layer_dims.size(); ++i) {
            specs_.push_back({"layer" + std::to_string(i) + ".coeff",
                              {k.layer_dims[i], k.layer_dims[i + 1], k.order + 1}});
        }
    }
}

std::size_t Network::input_dim() const {
    if (const auto* r = std::get_if<ResNetConfig>(&cfg_)) return r->input_dim;
    return std::get<KanConfig>(cfg_).layer_dims.front();
}

std::size_t Network::output_dim() const {
    if (const auto* r = std::get_if<ResNetConfig>(&cfg_)) return r->output_dim;
    return std::get<KanConfig>(cfg_).layer_dims.back();
}

std::size_t Network::param_count() const {
    std::size_t n = 0;
    for (const auto& s : specs_) n += shape_numel(s.shape);
    return n;
}

std::size_t Network::projection_param_count() const {
    if (!has_projection_) return 0;
    return shape_numel(specs_[0].shape) + shape_numel(specs_[1].shape);
}

std::vector<Tensor> Network::init_params(Rng& rng) const {
    std::vector<Tensor> out;
    out.reserve(specs_.size());
    if (is_kan()) {
        const auto& k = std::get<KanConfig>(cfg_);
        for (const auto& s : specs_) {
            const double r = 1.0 / static_cast<double>(s.shape[0] * (k.order + 1));
            Tensor t(s.shape);
            for (double& v : t.data()) v = rng.uniform(-r, r);
            out.push_back(std::move(t));
        }
        return out;
    }
    for (const auto& s : specs_) {
        Tensor t(s.shape);
        if (s.shape.size() == 2) {
            // Fan-in scaled uniform: Var = 1 / fan_in.
            const double lim = std::sqrt(3.0 / static_cast<double>(s.shape[0]));
            for (double& v : t.data()) v = rng.uniform(-lim, lim);
        }
        out.push_back(std::move(t));
    }
    return out;
}

void Network::check_params(std::span<const ad::Var> params) const {
    if (params.size() != specs_.size()) {
        throw DimensionError("network: expected " + std::to_string(specs_.size()) +
                             " parameter tensors, got " + std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < specs_.size(); ++i) {
        if (params[i].shape() != specs_[i].shape) {
            throw DimensionError("network: parameter '" + specs_[i].name + "' has shape " +
                                 shape_str(params[i].shape()) + ", expected " +
                                 shape_str(specs_[i].shape));
        }
    }
}

ad::Var Network::forward(std::span<const ad::Var> params, ad::Var x) const {
    check_params(params);
    const Tensor& xv = x.value();
    if (xv.rank() != 2 || xv.dim(1) != input_dim()) {
        throw DimensionError("network: input " + shape_str(xv.shape()) + " does not have width " +
                             std::to_string(input_dim()));
    }
    if (const auto* r = std::get_if<ResNetConfig>(&cfg_)) {
        std::size_t idx = 0;
        ad::Var skip = x;
        if (has_projection_) {
            skip = ad::add_bias(ad::matmul(x, params[0]), params[1]);
            idx = 2;
        }
        ad::Var z = x;
        for (std::size_t blk = 0; blk < r->num_hidden_layers / 2; ++blk) {
            ad::Var z1 = activate(ad::add_bias(ad::matmul(z, params[idx]), params[idx + 1]),
                                  r->activation);
            ad::Var z2 = ad::add_bias(ad::matmul(z1, params[idx + 2]), params[idx + 3]);
            z = activate(ad::add(z2, blk == 0 ? skip : z), r->activation);
            idx += 4;
        }
        return ad::add_bias(ad::matmul(z, params[idx]), params[idx + 1]);
    }

    const auto& k = std::get<KanConfig>(cfg_);
    ad::Var a = x;
    for (std::size_t layer = 0; layer + 1 < k.layer_dims.size(); ++layer) {
        const std::size_t in = k.layer_dims[layer], out = k.layer_dims[layer + 1];
        const std::size_t n = a.shape()[0];
        a = ad::sin(a);
        ad::Var poly = jacobi_basis(a, k.order, k.alpha, k.beta);  // [n, in, order+1]
        // einsum("ijk,jlk->il"): flatten (in, order+1) and contract against the
        // coefficients permuted to [in, order+1, out].
        ad::Var lhs = ad::reshape(poly, {n, in * (k.order + 1)});
        ad::Var rhs = ad::reshape(ad::swap_last_axes(params[layer]), {in * (k.order + 1), out});
        a = ad::matmul(lhs, rhs);
    }
    return a;
}

Tensor Network::forward(const std::vector<Tensor>& params, const Tensor& x) const {
    ad::Tape tape;
    std::vector<ad::Var> p;
    p.reserve(params.size());
    for (const auto& t : params) p.push_back(tape.constant(t));
    ad::Var out = forward(p, tape.constant(x));
    return out.value();
}

std::string describe(const NetworkConfig& cfg) {
    std::ostringstream os;
    if (const auto* r = std::get_if<ResNetConfig>(&cfg)) {
        os << "ResNet[" << r->input_dim << "-" << r->hidden_width << "x" << r->num_hidden_layers
           << "-" << r->output_dim << "]";
    } else {
        const auto& k = std::get<KanConfig>(cfg);
        os << "KAN[";
        for (std::size_t i = 0; i < k.layer_dims.size(); ++i) os << (i ? "-" : "") << k.layer_dims[i];
        os << "] order " << k.order;
    }
    return os.str();
}

}  // namespace amore::nn
