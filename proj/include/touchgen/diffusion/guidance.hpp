#pragma once

#include "touchgen/text/condition.hpp"

namespace touchgen::diffusion {

struct GuidanceConfig {
    double scale = 4.5;
    bool enabled = true;
};

// s * eps_cond + (1 - s) * eps_null
template <class T>
ag::Matrix<T> cfg_combine(const ag::Matrix<T>& eps_cond, const ag::Matrix<T>& eps_null, double s) {
    return (static_cast<T>(s) * eps_cond + static_cast<T>(1.0 - s) * eps_null).eval();
}

struct GuidanceTrace {
    int cond_rows = 0;
};

// Guided noise estimate on a throwaway inference tape. With guidance
// disabled only the conditional branch is evaluated.
template <class T, class Model>
ag::Matrix<T> cfg_noise(Model& model, const ag::Matrix<T>& x_t, int t, const text::ConditionValues<T>& values,
                        const GuidanceConfig& guidance, bool time_adaptive = true, GuidanceTrace* trace = nullptr) {
    ag::Tape<T> tape(false);
    const auto bundle = text::attach(tape, values);
    const auto x = tape.constant(x_t);
    const auto cond = text::fuse_conditions(bundle, t, model.timesteps(), time_adaptive);
    if (trace) trace->cond_rows = static_cast<int>(cond.rows.rows());
    ag::Matrix<T> eps_cond = model.predict_noise(tape, x, t, cond).value();
    if (!guidance.enabled) return eps_cond;
    const ag::Matrix<T>& eps_null = model.predict_noise(tape, x, t, text::null_condition(bundle)).value();
    return cfg_combine(eps_cond, eps_null, guidance.scale);
}

}  // namespace touchgen::diffusion
