#pragma once

#include <vector>

#include "touchgen/core/autograd.hpp"

namespace touchgen::diffusion {

enum class ScheduleKind { linear };

// Index t in [0, T) addresses the t-th noising step; alpha_bar[t] includes
// alpha[0..t].
struct NoiseSchedule {
    int timesteps = 0;
    std::vector<double> beta;
    std::vector<double> alpha;
    std::vector<double> alpha_bar;

    // Throws ConfigError if an invariant fails.
    void validate() const;
};

NoiseSchedule make_schedule(int timesteps = 1000, ScheduleKind kind = ScheduleKind::linear, double beta_start = 1e-4,
                            double beta_end = 2e-2);

// sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) eps
template <class T>
ag::Matrix<T> q_sample(const NoiseSchedule& schedule, const ag::Matrix<T>& x0, int t, const ag::Matrix<T>& eps);

}  // namespace touchgen::diffusion
