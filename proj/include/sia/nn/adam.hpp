#pragma once

#include <cmath>
#include <unordered_map>
#include <vector>

#include "sia/nn/tensor.hpp"

namespace sia::nn {

class Adam {
public:
    explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    // Applies one update from the accumulated gradients, scaled by
    // 1/grad_scale (the number of pairs the gradients were summed over).
    void step(const std::vector<Param*>& params, double grad_scale = 1.0) {
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, t_);
        const double bc2 = 1.0 - std::pow(beta2_, t_);
        for (Param* p : params) {
            if (!p->trainable) continue;
            auto& state = state_[p];
            if (state.m.size() != p->size()) {
                state.m.assign(p->size(), 0.f);
                state.v.assign(p->size(), 0.f);
            }
            for (std::size_t i = 0; i < p->size(); ++i) {
                double g = p->grad[i] / grad_scale;
                state.m[i] = static_cast<float>(beta1_ * state.m[i] + (1.0 - beta1_) * g);
                state.v[i] = static_cast<float>(beta2_ * state.v[i] + (1.0 - beta2_) * g * g);
                double mhat = state.m[i] / bc1;
                double vhat = state.v[i] / bc2;
                p->value[i] -= static_cast<float>(lr_ * mhat / (std::sqrt(vhat) + eps_));
            }
        }
    }

    void set_lr(double lr) { lr_ = lr; }

private:
    struct State {
        std::vector<float> m, v;
    };
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
    std::unordered_map<Param*, State> state_;
};

}  // namespace sia::nn
