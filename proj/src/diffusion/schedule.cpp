#include "touchgen/diffusion/schedule.hpp"

#include <cmath>
#include <string>

#include "touchgen/core/errors.hpp"

namespace touchgen::diffusion {

void NoiseSchedule::validate() const {
    const auto n = static_cast<std::size_t>(timesteps);
    if (timesteps < 1 || beta.size() != n || alpha.size() != n || alpha_bar.size() != n)
        throw ConfigError("noise schedule arrays do not match T");
    for (std::size_t t = 0; t < n; ++t) {
        if (!(beta[t] > 0.0 && beta[t] < 1.0)) throw ConfigError("beta[" + std::to_string(t) + "] outside (0, 1)");
        if (alpha[t] != 1.0 - beta[t]) throw ConfigError("alpha != 1 - beta at " + std::to_string(t));
        const double prev = t == 0 ? 1.0 : alpha_bar[t - 1];
        if (alpha_bar[t] != prev * alpha[t]) throw ConfigError("alpha_bar is not the running product at " + std::to_string(t));
        if (!(alpha_bar[t] < prev)) throw ConfigError("alpha_bar not strictly decreasing at " + std::to_string(t));
    }
}

NoiseSchedule make_schedule(int timesteps, ScheduleKind kind, double beta_start, double beta_end) {
    if (timesteps < 1) throw ConfigError("schedule needs T >= 1 (got " + std::to_string(timesteps) + ")");
    if (kind != ScheduleKind::linear) throw ConfigError("unsupported schedule kind");
    NoiseSchedule s;
    s.timesteps = timesteps;
    const auto n = static_cast<std::size_t>(timesteps);
    s.beta.resize(n);
    s.alpha.resize(n);
    s.alpha_bar.resize(n);
    double running = 1.0;
    for (std::size_t t = 0; t < n; ++t) {
        s.beta[t] = timesteps == 1 ? beta_start
                                   : beta_start + (beta_end - beta_start) * static_cast<double>(t) / (timesteps - 1);
        s.alpha[t] = 1.0 - s.beta[t];
        running *= s.alpha[t];
        s.alpha_bar[t] = running;
    }
    s.validate();
    return s;
}

template <class T>
ag::Matrix<T> q_sample(const NoiseSchedule& schedule, const ag::Matrix<T>& x0, int t, const ag::Matrix<T>& eps) {
    if (x0.rows() != eps.rows() || x0.cols() != eps.cols()) throw ShapeError("q_sample: eps shape differs from x0");
    if (t < 0 || t >= schedule.timesteps) throw ConfigError("q_sample: timestep " + std::to_string(t) + " out of range");
    const double ab = schedule.alpha_bar[static_cast<std::size_t>(t)];
    return (static_cast<T>(std::sqrt(ab)) * x0 + static_cast<T>(std::sqrt(1.0 - ab)) * eps).eval();
}

template ag::Matrix<float> q_sample(const NoiseSchedule&, const ag::Matrix<float>&, int, const ag::Matrix<float>&);
template ag::Matrix<double> q_sample(const NoiseSchedule&, const ag::Matrix<double>&, int, const ag::Matrix<double>&);

}  // namespace touchgen::diffusion
