#pragma once

#include <vector>

#include "touchgen/core/autograd.hpp"

namespace touchgen::optim {

struct AdamWConfig {
    double lr = 2e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.03;
};

// Linear warmup to base_lr over warmup_steps, constant afterwards.
double warmup_lr(double base_lr, long step, long warmup_steps);

// Decoupled weight decay Adam. Parameters whose gradient was not touched in
// the current step are skipped entirely (no decay, no moment update).
template <class T>
class AdamW {
public:
    AdamW(ag::ParameterList<T> params, AdamWConfig config);

    void step(double lr);
    void step() { step(config_.lr); }
    void zero_grad();

    const ag::ParameterList<T>& parameters() const { return params_; }
    const AdamWConfig& config() const { return config_; }

private:
    struct State {
        ag::Matrix<T> m;
        ag::Matrix<T> v;
        long steps = 0;
    };
    ag::ParameterList<T> params_;
    AdamWConfig config_;
    std::vector<State> state_;
};

}  // namespace touchgen::optim
