#pragma once

#include <vector>

#include "amore/tensor.hpp"

namespace amore::ad {

// lr(epoch) = initial * 0.5^(epoch / half_life_epochs); half_life <= 0 means constant.
struct LearningRateSchedule {
    double initial = 1e-3;
    double half_life_epochs = 2000.0;

    double at(int epoch) const;
};

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    LearningRateSchedule schedule;
};

// Adam with bias correction (Kingma & Ba). Owns the moment estimates of one
// parameter list; the step counter advances once per update.
class Adam {
  public:
    Adam(AdamConfig cfg, const std::vector<Tensor>& params);

    void step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, double lr);

    long steps() const noexcept { return t_; }
    const AdamConfig& config() const noexcept { return cfg_; }
    const std::vector<Tensor>& first_moments() const noexcept { return m_; }
    const std::vector<Tensor>& second_moments() const noexcept { return v_; }

  private:
    AdamConfig cfg_;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
    long t_ = 0;
};

}  // namespace amore::ad
