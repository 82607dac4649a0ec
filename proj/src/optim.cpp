#include "swinhaze/optim.hpp"

namespace swinhaze::optim {

Adam::Adam(const network::ParameterStore& params, AdamConfig cfg)
    : params_(params), cfg_(cfg), state_(params.size()) {
    if (!(cfg.lr > 0)) fail(ErrorCode::InvalidParameter, "learning rate must be positive");
}

void Adam::step() {
    ++step_;
    std::vector<double> p;
    for (std::size_t i = 0; i < params_.size(); ++i) {
        nn::Tensor t = params_.entries()[i].tensor;
        const auto g = t.grad();
        if (g.empty()) continue;
        auto values = t.mutable_values();
        p.assign(values.begin(), values.end());
        const std::vector<double> gd(g.begin(), g.end());
        adam_update<double>(p, gd, state_[i], step_, cfg_);
        for (std::size_t k = 0; k < p.size(); ++k) values[k] = static_cast<nn::real>(p[k]);
    }
}

}  // namespace swinhaze::optim
