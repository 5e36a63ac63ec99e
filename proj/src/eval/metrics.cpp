#include "touchgen/eval/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "touchgen/core/errors.hpp"

namespace touchgen::eval {

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

void check_shapes(const Image& a, const Image& b) {
    if (!a.same_shape(b) || a.empty())
        throw InputError("metric inputs must be non-empty and equally shaped (" + std::to_string(a.height) + "x" +
                         std::to_string(a.width) + "x" + std::to_string(a.channels) + " vs " +
                         std::to_string(b.height) + "x" + std::to_string(b.width) + "x" +
                         std::to_string(b.channels) + ")");
}

std::vector<double> gaussian_window(int size) {
    std::vector<double> w(static_cast<std::size_t>(size) * size);
    const double c = (size - 1) / 2.0;
    double total = 0.0;
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const double v = std::exp(-((y - c) * (y - c) + (x - c) * (x - c)) / (2.0 * kSigma * kSigma));
            w[static_cast<std::size_t>(y * size + x)] = v;
            total += v;
        }
    for (auto& v : w) v /= total;
    return w;
}

}  // namespace

double ssim(const Image& a, const Image& b) {
    check_shapes(a, b);
    const int win = std::min({kWindow, a.height, a.width});
    const auto w = gaussian_window(win);
    double total = 0.0;
    long count = 0;
    for (int c = 0; c < a.channels; ++c)
        for (int y0 = 0; y0 + win <= a.height; ++y0)
            for (int x0 = 0; x0 + win <= a.width; ++x0) {
                double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
                for (int dy = 0; dy < win; ++dy)
                    for (int dx = 0; dx < win; ++dx) {
                        const double wt = w[static_cast<std::size_t>(dy * win + dx)];
                        const double va = a.at(y0 + dy, x0 + dx, c);
                        const double vb = b.at(y0 + dy, x0 + dx, c);
                        mx += wt * va;
                        my += wt * vb;
                        sxx += wt * va * va;
                        syy += wt * vb * vb;
                        sxy += wt * va * vb;
                    }
                const double vx = sxx - mx * mx, vy = syy - my * my, cxy = sxy - mx * my;
                total += ((2 * mx * my + kC1) * (2 * cxy + kC2)) / ((mx * mx + my * my + kC1) * (vx + vy + kC2));
                ++count;
            }
    return total / static_cast<double>(count);
}

double mse(const Image& a, const Image& b) {
    check_shapes(a, b);
    double se = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
        se += d * d;
    }
    return se / static_cast<double>(a.size());
}

double psnr(const Image& a, const Image& b) {
    const double m = mse(a, b);
    if (m <= 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / m));
}

}  // namespace touchgen::eval
