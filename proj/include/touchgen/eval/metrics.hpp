#pragma once

#include "touchgen/core/image.hpp"

namespace touchgen::eval {

inline constexpr double kPsnrCap = 99.0;

// Gaussian-window SSIM (11x11, sigma 1.5, K1 0.01, K2 0.03, L 1) averaged over
// every fully contained window and every channel. Images smaller than the
// window use a single window covering the whole image.
double ssim(const Image& a, const Image& b);

// 10 log10(1 / MSE); identical images give kPsnrCap.
double psnr(const Image& a, const Image& b);

double mse(const Image& a, const Image& b);

}  // namespace touchgen::eval
