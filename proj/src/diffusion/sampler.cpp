#include "touchgen/diffusion/sampler.hpp"

#include <cmath>

#include "touchgen/core/errors.hpp"

namespace touchgen::diffusion {

namespace {

template <class T>
void check_finite(const ag::Matrix<T>& m, int step, int t) {
    if (!m.allFinite())
        throw SamplingError("non-finite values at sampling step " + std::to_string(step) + " (t=" + std::to_string(t) + ")");
}

template <class T>
void clamp(ag::Matrix<T>& m, double clip) {
    if (clip > 0.0) m = m.cwiseMax(static_cast<T>(-clip)).cwiseMin(static_cast<T>(clip));
}

}  // namespace

const char* sampler_name(SamplerKind kind) { return kind == SamplerKind::ddpm ? "ddpm" : "ddim"; }

SamplerKind parse_sampler(const std::string& name) {
    if (name == "ddpm") return SamplerKind::ddpm;
    if (name == "ddim") return SamplerKind::ddim;
    throw ConfigError("unknown sampler '" + name + "' (expected ddpm or ddim)");
}

std::vector<int> timestep_sequence(int timesteps, int steps) {
    if (steps < 1 || steps > timesteps)
        throw ConfigError("sampling steps " + std::to_string(steps) + " outside [1, " + std::to_string(timesteps) + "]");
    std::vector<int> ts(static_cast<std::size_t>(steps));
    for (int i = 0; i < steps; ++i) {
        const double v = steps == 1 ? timesteps - 1 : (timesteps - 1) * (1.0 - static_cast<double>(i) / (steps - 1));
        ts[static_cast<std::size_t>(i)] = static_cast<int>(std::lround(v));
    }
    return ts;
}

template <class T>
ag::Matrix<T> ddim_sample(const NoiseFn<T>& noise, const NoiseSchedule& schedule, ag::Matrix<T> x,
                          const DdimOptions& options) {
    const auto ts = timestep_sequence(schedule.timesteps, options.steps);
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const int t = ts[i];
        const double ab = schedule.alpha_bar[static_cast<std::size_t>(t)];
        const double ab_prev = i + 1 < ts.size() ? schedule.alpha_bar[static_cast<std::size_t>(ts[i + 1])] : 1.0;
        const ag::Matrix<T> eps = noise(x, t);
        check_finite(eps, static_cast<int>(i), t);
        ag::Matrix<T> x0 = (x - static_cast<T>(std::sqrt(1.0 - ab)) * eps) / static_cast<T>(std::sqrt(ab));
        clamp(x0, options.clip_x0);
        // Re-derive eps from the (possibly clamped) x0 so the step stays on the ODE.
        const ag::Matrix<T> eps_used =
            options.clip_x0 > 0.0 ? ((x - static_cast<T>(std::sqrt(ab)) * x0) / static_cast<T>(std::sqrt(1.0 - ab))).eval()
                                  : eps;
        x = static_cast<T>(std::sqrt(ab_prev)) * x0 + static_cast<T>(std::sqrt(1.0 - ab_prev)) * eps_used;
        check_finite(x, static_cast<int>(i), t);
    }
    return x;
}

template <class T>
ag::Matrix<T> ddpm_sample(const NoiseFn<T>& noise, const NoiseSchedule& schedule, ag::Matrix<T> x, Rng& rng,
                          double clip_x0) {
    int step = 0;
    for (int t = schedule.timesteps - 1; t >= 0; --t, ++step) {
        const auto ut = static_cast<std::size_t>(t);
        const double ab = schedule.alpha_bar[ut];
        const double ab_prev = t > 0 ? schedule.alpha_bar[ut - 1] : 1.0;
        const double beta = schedule.beta[ut];
        const ag::Matrix<T> eps = noise(x, t);
        check_finite(eps, step, t);
        // Posterior mean written through the x0 estimate.
        ag::Matrix<T> x0 = (x - static_cast<T>(std::sqrt(1.0 - ab)) * eps) / static_cast<T>(std::sqrt(ab));
        clamp(x0, clip_x0);
        const double c0 = std::sqrt(ab_prev) * beta / (1.0 - ab);
        const double ct = std::sqrt(schedule.alpha[ut]) * (1.0 - ab_prev) / (1.0 - ab);
        x = static_cast<T>(c0) * x0 + static_cast<T>(ct) * x;
        if (t > 0) {
            const double sigma = std::sqrt(beta * (1.0 - ab_prev) / (1.0 - ab));
            for (Eigen::Index k = 0; k < x.size(); ++k) x.data()[k] += static_cast<T>(sigma * rng.normal());
        }
        check_finite(x, step, t);
    }
    return x;
}

template ag::Matrix<float> ddim_sample(const NoiseFn<float>&, const NoiseSchedule&, ag::Matrix<float>, const DdimOptions&);
template ag::Matrix<double> ddim_sample(const NoiseFn<double>&, const NoiseSchedule&, ag::Matrix<double>,
                                        const DdimOptions&);
template ag::Matrix<float> ddpm_sample(const NoiseFn<float>&, const NoiseSchedule&, ag::Matrix<float>, Rng&, double);
template ag::Matrix<double> ddpm_sample(const NoiseFn<double>&, const NoiseSchedule&, ag::Matrix<double>, Rng&, double);

}  // namespace touchgen::diffusion
