#include <doctest.h>

#include <cmath>

#include "touchgen/core/errors.hpp"
#include "touchgen/core/rng.hpp"
#include "touchgen/diffusion/schedule.hpp"

using namespace touchgen;
using namespace touchgen::diffusion;
using ag::Matrix;

TEST_CASE("linear schedule endpoints and invariants") {
    const auto s = make_schedule(1000);
    CHECK(s.beta.front() == doctest::Approx(1e-4).epsilon(1e-12));
    CHECK(s.beta.back() == doctest::Approx(2e-2).epsilon(1e-12));
    CHECK(s.alpha_bar[0] == doctest::Approx(1.0 - 1e-4).epsilon(1e-15));
    for (int t = 1; t < 1000; ++t) {
        CHECK(s.alpha_bar[t] < s.alpha_bar[t - 1]);
        CHECK(s.alpha_bar[t] == s.alpha_bar[t - 1] * s.alpha[t]);
    }
    CHECK(s.alpha_bar.back() < 1e-2);
    CHECK_NOTHROW(s.validate());
    CHECK(make_schedule(1).timesteps == 1);
    CHECK_THROWS_AS(make_schedule(0), ConfigError);
    auto broken = s;
    broken.alpha_bar[10] *= 1.0001;
    CHECK_THROWS_AS(broken.validate(), ConfigError);
}

TEST_CASE("q_sample closed form limits") {
    const auto s = make_schedule(1000);
    Matrix<double> x0(2, 2);
    x0 << 0.5, -0.25, 1.0, 0.0;
    const Matrix<double> zero = Matrix<double>::Zero(2, 2);
    Matrix<double> eps(2, 2);
    eps << 1.0, -2.0, 0.5, 3.0;
    for (int t : {0, 250, 999}) {
        CHECK((q_sample(s, x0, t, zero) - std::sqrt(s.alpha_bar[t]) * x0).cwiseAbs().maxCoeff() < 1e-15);
        CHECK((q_sample(s, zero, t, eps) - std::sqrt(1.0 - s.alpha_bar[t]) * eps).cwiseAbs().maxCoeff() < 1e-15);
    }
    CHECK_THROWS_AS(q_sample(s, x0, 0, Matrix<double>::Zero(1, 4).eval()), ShapeError);
    CHECK_THROWS_AS(q_sample(s, x0, 1000, eps), ConfigError);
}

TEST_CASE("closed-form marginal matches the iterated single-step process") {
    const auto s = make_schedule(1000);
    Matrix<double> x0(2, 2);
    x0 << 0.8, -0.6, 0.1, -1.0;
    constexpr int kDraws = 10000;
    Rng rng(2024);
    for (int t : {0, 40, 300, 999}) {
        CAPTURE(t);
        Matrix<double> sum = Matrix<double>::Zero(2, 2), sum_sq = Matrix<double>::Zero(2, 2);
        for (int d = 0; d < kDraws; ++d) {
            Matrix<double> x = x0;
            // x_s = sqrt(1 - beta_s) x_{s-1} + sqrt(beta_s) z, applied for s = 0..t.
            for (int step = 0; step <= t; ++step)
                for (int k = 0; k < 4; ++k)
                    x.data()[k] = std::sqrt(1.0 - s.beta[step]) * x.data()[k] + std::sqrt(s.beta[step]) * rng.normal();
            sum += x;
            sum_sq += x.cwiseProduct(x);
        }
        const double var_expected = 1.0 - s.alpha_bar[t];
        for (int k = 0; k < 4; ++k) {
            const double mean = sum.data()[k] / kDraws;
            const double var = sum_sq.data()[k] / kDraws - mean * mean;
            const double mean_expected = std::sqrt(s.alpha_bar[t]) * x0.data()[k];
            const double se_mean = std::sqrt(var_expected / kDraws);
            // Standard error of a Gaussian sample variance.
            const double se_var = var_expected * std::sqrt(2.0 / (kDraws - 1));
            CHECK(std::abs(mean - mean_expected) < 3.0 * se_mean);
            CHECK(std::abs(var - var_expected) < 3.0 * se_var);
        }
    }
}
