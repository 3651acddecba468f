#include "adfrl/nn/optim.hpp"

#include <cmath>

namespace adfrl::nn {

void zero_grads(std::span<ParamRef> params) {
    for (ParamRef& p : params)
        for (double& g : p.grad) g = 0.0;
}

void Sgd::step(std::span<ParamRef> params) {
    for (ParamRef& p : params)
        for (std::size_t i = 0; i < p.value.size(); ++i) p.value[i] -= lr_ * p.grad[i];
}

void Adam::step(std::span<ParamRef> params) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (ParamRef& p : params) {
        Moments& mom = state_[p.name];
        if (mom.m.empty()) {
            mom.m.assign(p.value.size(), 0.0);
            mom.v.assign(p.value.size(), 0.0);
        }
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double g = p.grad[i];
            mom.m[i] = beta1_ * mom.m[i] + (1.0 - beta1_) * g;
            mom.v[i] = beta2_ * mom.v[i] + (1.0 - beta2_) * g * g;
            const double mhat = mom.m[i] / bc1;
            const double vhat = mom.v[i] / bc2;
            p.value[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

void Adam::reset() {
    t_ = 0;
    state_.clear();
}

std::unique_ptr<Optimizer> make_optimizer(OptimKind kind, double lr) {
    if (kind == OptimKind::SGD) return std::make_unique<Sgd>(lr);
    return std::make_unique<Adam>(lr);
}

} // namespace adfrl::nn
