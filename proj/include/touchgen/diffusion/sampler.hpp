#pragma once

#include <functional>
#include <string>
#include <vector>

#include "touchgen/core/rng.hpp"
#include "touchgen/diffusion/schedule.hpp"

namespace touchgen::diffusion {

enum class SamplerKind { ddpm, ddim };

const char* sampler_name(SamplerKind kind);
SamplerKind parse_sampler(const std::string& name);

template <class T>
using NoiseFn = std::function<ag::Matrix<T>(const ag::Matrix<T>& x_t, int t)>;

// round(linspace(T-1, 0, steps)); steps in [1, T].
std::vector<int> timestep_sequence(int timesteps, int steps);

struct DdimOptions {
    int steps = 50;
    // Clamp the x0 estimate to [-clip, clip] at every step; 0 disables.
    double clip_x0 = 0.0;
};

// Deterministic uniform-stride sampler ending at alpha_bar = 1.
template <class T>
ag::Matrix<T> ddim_sample(const NoiseFn<T>& noise, const NoiseSchedule& schedule, ag::Matrix<T> x,
                          const DdimOptions& options);

// Ancestral sampler over all T steps with the posterior variance.
template <class T>
ag::Matrix<T> ddpm_sample(const NoiseFn<T>& noise, const NoiseSchedule& schedule, ag::Matrix<T> x, Rng& rng,
                          double clip_x0 = 0.0);

}  // namespace touchgen::diffusion
