#include <doctest.h>

#include <cmath>

#include "touchgen/core/errors.hpp"
#include "touchgen/core/rng.hpp"
#include "touchgen/eval/metrics.hpp"

using namespace touchgen;
using namespace touchgen::eval;

namespace {

Image random_image(int h, int w, int c, std::uint64_t seed) {
    Rng rng(seed);
    Image img(h, w, c);
    for (auto& v : img.data) v = static_cast<float>(rng.uniform());
    return img;
}

// Single-window SSIM computed straight from the definition.
double one_window_ssim(const Image& a, const Image& b, int c) {
    const int n = a.height;
    double wsum = 0.0;
    std::vector<double> w;
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            const double dy = y - (n - 1) / 2.0, dx = x - (n - 1) / 2.0;
            w.push_back(std::exp(-(dx * dx + dy * dy) / (2 * 1.5 * 1.5)));
            wsum += w.back();
        }
    double ma = 0, mb = 0;
    for (int i = 0; i < n * n; ++i) {
        ma += w[i] / wsum * a.data[static_cast<std::size_t>(i * a.channels + c)];
        mb += w[i] / wsum * b.data[static_cast<std::size_t>(i * b.channels + c)];
    }
    double va = 0, vb = 0, cov = 0;
    for (int i = 0; i < n * n; ++i) {
        const double da = a.data[static_cast<std::size_t>(i * a.channels + c)] - ma;
        const double db = b.data[static_cast<std::size_t>(i * b.channels + c)] - mb;
        va += w[i] / wsum * da * da;
        vb += w[i] / wsum * db * db;
        cov += w[i] / wsum * da * db;
    }
    const double c1 = 1e-4, c2 = 9e-4;
    return (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
}

}  // namespace

TEST_CASE("SSIM of an image with itself is exactly one") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const Image x = random_image(32, 32, 3, seed);
        CHECK(ssim(x, x) == 1.0);
    }
}

TEST_CASE("SSIM is symmetric and bounded") {
    const Image a = random_image(20, 24, 3, 7), b = random_image(20, 24, 3, 8);
    CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-12));
    CHECK(ssim(a, b) <= 1.0);
    CHECK(ssim(a, b) >= -1.0);
}

TEST_CASE("constant-image SSIM matches the scalar formula") {
    const Image a(32, 32, 3, 0.5f), b(32, 32, 3, 0.6f);
    const double mu_a = 0.5, mu_b = static_cast<double>(0.6f);
    const double c1 = 0.01 * 0.01;
    // Zero variance and covariance: the structure term is C2/C2.
    const double oracle = (2 * mu_a * mu_b + c1) / (mu_a * mu_a + mu_b * mu_b + c1);
    CHECK(std::abs(ssim(a, b) - oracle) < 1e-6);
}

TEST_CASE("an 11x11 image is a single Gaussian window") {
    const Image a = random_image(11, 11, 2, 3), b = random_image(11, 11, 2, 4);
    const double oracle = 0.5 * (one_window_ssim(a, b, 0) + one_window_ssim(a, b, 1));
    CHECK(ssim(a, b) == doctest::Approx(oracle).epsilon(1e-9));
}

TEST_CASE("PSNR follows 10 log10(1/MSE)") {
    for (double target : {0.01, 0.25}) {
        // Half the pixels offset by +d, half by -d: MSE = d^2 exactly in double.
        const double d = std::sqrt(target);
        Image a(4, 4, 1, 0.5f), b(4, 4, 1, 0.5f);
        for (std::size_t i = 0; i < b.size(); ++i) b.data[i] = static_cast<float>(0.5 + (i % 2 ? d : -d));
        const double m = mse(a, b);
        CHECK(std::abs(m - target) < 1e-7);
        CHECK(std::abs(psnr(a, b) - 10.0 * std::log10(1.0 / m)) < 1e-9);
    }
    Image a(2, 2, 1, 0.0f), b(2, 2, 1, 0.1f);
    CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-6));
}

TEST_CASE("identical images hit the PSNR cap") {
    const Image x = random_image(8, 8, 3, 9);
    CHECK(psnr(x, x) == kPsnrCap);
    const Image y = random_image(8, 8, 3, 10);
    CHECK(psnr(x, y) == psnr(y, x));
}

TEST_CASE("metrics reject mismatched shapes") {
    const Image a(8, 8, 3), b(8, 9, 3);
    CHECK_THROWS_AS(ssim(a, b), InputError);
    CHECK_THROWS_AS(psnr(a, b), InputError);
    CHECK_THROWS_AS(mse(a, b), InputError);
}
