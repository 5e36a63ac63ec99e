#pragma once

#include <cmath>
#include <cstdio>

#include "touchgen/core/errors.hpp"
#include "touchgen/diffusion/schedule.hpp"
#include "touchgen/text/condition.hpp"

namespace touchgen::diffusion {

// mean((eps - eps_theta(x_t, t, c))^2) with x_t from the closed-form forward
// process and c either the null row (cfg_drop) or the time-gated fusion.
//
// Model must provide predict_noise(tape, x_t, t, fused) -> Var of eps shape.
template <class T, class Model>
ag::Var<T> training_loss(ag::Tape<T>& tape, Model& model, const NoiseSchedule& schedule, const ag::Matrix<T>& x0,
                         const text::ConditionBundle<T>& bundle, int t, const ag::Matrix<T>& eps, bool cfg_drop,
                         bool time_adaptive = true) {
    const ag::Matrix<T> x_t = q_sample(schedule, x0, t, eps);
    const auto cond = cfg_drop ? text::null_condition(bundle)
                               : text::fuse_conditions(bundle, t, schedule.timesteps, time_adaptive);
    const ag::Var<T> pred = model.predict_noise(tape, tape.constant(x_t), t, cond);
    const ag::Var<T> loss = ag::mse(pred, eps);
    if (!std::isfinite(static_cast<double>(loss.item()))) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "non-finite diffusion loss at t=%d (|x_t|=%.4g)", t,
                      static_cast<double>(x_t.norm()));
        throw TrainingError(buf);
    }
    return loss;
}

}  // namespace touchgen::diffusion
