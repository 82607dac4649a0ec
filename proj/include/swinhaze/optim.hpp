#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "swinhaze/error.hpp"
#include "swinhaze/network.hpp"

namespace swinhaze::optim {

struct AdamConfig {
    double lr = 1e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <class T>
struct AdamState {
    std::vector<T> m;
    std::vector<T> v;
};

// One bias-corrected Adam update; `step` counts from 1.
template <class T>
void adam_update(std::span<T> param, std::span<const T> grad, AdamState<T>& state, long step,
                 const AdamConfig& cfg) {
    if (grad.size() != param.size()) fail(ErrorCode::ShapeMismatch, "gradient and parameter sizes differ");
    if (step < 1) fail(ErrorCode::InvalidParameter, "adam step counts from 1");
    if (state.m.empty()) {
        state.m.assign(param.size(), T{0});
        state.v.assign(param.size(), T{0});
    }
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double g = grad[i];
        const double m = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        const double v = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        state.m[i] = static_cast<T>(m);
        state.v[i] = static_cast<T>(v);
        param[i] = static_cast<T>(param[i] - cfg.lr * (m / c1) / (std::sqrt(v / c2) + cfg.eps));
    }
}

// Adam over every tensor of a parameter store. Tensors that received no
// gradient in a step are left untouched.
class Adam {
public:
    Adam(const network::ParameterStore& params, AdamConfig cfg);

    void step();
    long steps() const noexcept { return step_; }
    const AdamConfig& config() const noexcept { return cfg_; }

private:
    const network::ParameterStore& params_;
    AdamConfig cfg_;
    std::vector<AdamState<double>> state_;
    long step_ = 0;
};

}  // namespace swinhaze::optim
