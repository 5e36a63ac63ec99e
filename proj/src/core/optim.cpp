#include "touchgen/core/optim.hpp"

#include <algorithm>
#include <cmath>

namespace touchgen::optim {

double warmup_lr(double base_lr, long step, long warmup_steps) {
    if (warmup_steps <= 0) return base_lr;
    return base_lr * std::min(1.0, static_cast<double>(step + 1) / static_cast<double>(warmup_steps));
}

template <class T>
AdamW<T>::AdamW(ag::ParameterList<T> params, AdamWConfig config) : params_(std::move(params)), config_(config) {
    state_.resize(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i) {
        const auto& value = params_[i].param->value;
        state_[i].m.setZero(value.rows(), value.cols());
        state_[i].v.setZero(value.rows(), value.cols());
        params_[i].param->zero_grad();
    }
}

template <class T>
void AdamW<T>::step(double lr) {
    const T b1 = static_cast<T>(config_.beta1);
    const T b2 = static_cast<T>(config_.beta2);
    for (std::size_t i = 0; i < params_.size(); ++i) {
        ag::Parameter<T>& p = *params_[i].param;
        if (!p.trainable || !p.touched) continue;
        State& s = state_[i];
        ++s.steps;
        s.m = b1 * s.m + (T(1) - b1) * p.grad;
        s.v = b2 * s.v + (T(1) - b2) * p.grad.cwiseProduct(p.grad);
        const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(s.steps));
        const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(s.steps));
        const T step_size = static_cast<T>(lr / bc1);
        const T inv_bc2_sqrt = static_cast<T>(1.0 / std::sqrt(bc2));
        const T eps = static_cast<T>(config_.eps);
        p.value *= static_cast<T>(1.0 - lr * config_.weight_decay);
        p.value.array() -= step_size * s.m.array() / (s.v.array().sqrt() * inv_bc2_sqrt + eps);
    }
}

template <class T>
void AdamW<T>::zero_grad() {
    for (auto& np : params_) np.param->zero_grad();
}

template class AdamW<float>;
template class AdamW<double>;

}  // namespace touchgen::optim
