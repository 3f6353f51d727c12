#include "amore/adam.hpp"

#include <cmath>

#include "amore/error.hpp"

namespace amore::ad {

double LearningRateSchedule::at(int epoch) const {
    if (half_life_epochs <= 0.0) return initial;
    return initial * std::pow(0.5, static_cast<double>(epoch) / half_life_epochs);
}

Adam::Adam(AdamConfig cfg, const std::vector<Tensor>& params) : cfg_(cfg) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const auto& p : params) {
        m_.emplace_back(p.shape(), 0.0);
        v_.emplace_back(p.shape(), 0.0);
    }
}

void Adam::step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, double lr) {
    if (params.size() != m_.size() || grads.size() != m_.size()) {
        throw DimensionError("adam: expected " + std::to_string(m_.size()) + " parameter tensors");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i].shape() != m_[i].shape() || grads[i].shape() != m_[i].shape()) {
            throw DimensionError("adam: parameter " + std::to_string(i) + " has shape " +
                                 shape_str(params[i].shape()) + ", gradient " +
                                 shape_str(grads[i].shape()) + ", state " +
                                 shape_str(m_[i].shape()));
        }
    }
    ++t_;
    const double b1 = cfg_.beta1, b2 = cfg_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto p = params[i].data();
        auto g = grads[i].data();
        auto m = m_[i].data();
        auto v = v_[i].data();
        for (std::size_t k = 0; k < p.size(); ++k) {
            m[k] = b1 * m[k] + (1.0 - b1) * g[k];
            v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
            const double mhat = m[k] / c1;
            const double vhat = v[k] / c2;
            p[k] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }
}

}  // namespace amore::ad
