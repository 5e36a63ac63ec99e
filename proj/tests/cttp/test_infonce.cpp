#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "../support/gradcheck.hpp"
#include "touchgen/core/errors.hpp"
#include "touchgen/cttp/cttp.hpp"

using namespace touchgen;
using namespace touchgen::cttp;
using ag::Matrix;
using ag::Tape;

namespace {

// Explicit double loop over the per-pair log-softmax terms, both directions.
double brute_force_info_nce(const Matrix<double>& tac, const Matrix<double>& tex, double tau) {
    const auto b = tac.rows();
    auto norm = [](const Matrix<double>& m, Eigen::Index r) { return std::sqrt(m.row(r).squaredNorm()); };
    auto sim = [&](Eigen::Index i, Eigen::Index j) {
        double dot = 0.0;
        for (Eigen::Index k = 0; k < tac.cols(); ++k) dot += tac(i, k) * tex(j, k);
        return dot / (norm(tac, i) * norm(tex, j)) / tau;
    };
    double l_tac = 0.0, l_tex = 0.0;
    for (Eigen::Index i = 0; i < b; ++i) {
        double denom_tac = 0.0, denom_tex = 0.0;
        for (Eigen::Index j = 0; j < b; ++j) {
            denom_tac += std::exp(sim(i, j));
            denom_tex += std::exp(sim(j, i));
        }
        l_tac += -std::log(std::exp(sim(i, i)) / denom_tac);
        l_tex += -std::log(std::exp(sim(i, i)) / denom_tex);
    }
    return l_tac / b + l_tex / b;
}

double loss_value(const Matrix<double>& tac, const Matrix<double>& tex, double tau) {
    Tape<double> tape(false);
    return info_nce_loss(tape.constant(tac), tape.constant(tex), tau).item();
}

}  // namespace

TEST_CASE("InfoNCE closed-form cases") {
    Rng rng(1);
    const Matrix<double> one = nn::normal_matrix<double>(1, 6, 1.0, rng);
    const Matrix<double> other = nn::normal_matrix<double>(1, 6, 1.0, rng);
    CHECK(loss_value(one, other, 0.07) == 0.0);

    Matrix<double> basis = Matrix<double>::Zero(2, 4);
    basis(0, 0) = 1.0;
    basis(1, 1) = 1.0;
    CHECK(loss_value(basis, basis, 1.0) == doctest::Approx(2.0 * std::log(1.0 + std::exp(-1.0))).epsilon(1e-14));

    CHECK_THROWS_AS(loss_value(basis, basis, 0.0), ConfigError);
    CHECK_THROWS_AS(loss_value(basis, basis, -1.0), ConfigError);
    CHECK_THROWS_AS(loss_value(basis, one.leftCols(4), 1.0), ShapeError);
}

TEST_CASE("vectorised InfoNCE matches the brute-force oracle") {
    Rng rng(2);
    for (int trial = 0; trial < 100; ++trial) {
        for (int b = 1; b <= 8; ++b) {
            const Matrix<double> tac = nn::normal_matrix<double>(b, 5, 1.0, rng);
            const Matrix<double> tex = nn::normal_matrix<double>(b, 5, 1.0, rng);
            const double tau = 0.05 + rng.uniform();
            CHECK(std::abs(loss_value(tac, tex, tau) - brute_force_info_nce(tac, tex, tau)) < 1e-6);
        }
    }
}

TEST_CASE("InfoNCE properties") {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix<double> tac = nn::normal_matrix<double>(6, 4, 1.0, rng);
        const Matrix<double> tex = nn::normal_matrix<double>(6, 4, 1.0, rng);
        const double base = loss_value(tac, tex, 0.1);
        CHECK(base >= 0.0);
        std::vector<int> perm(6);
        std::iota(perm.begin(), perm.end(), 0);
        std::reverse(perm.begin(), perm.end());
        std::swap(perm[1], perm[4]);
        Matrix<double> ptac(6, 4), ptex(6, 4);
        for (int i = 0; i < 6; ++i) {
            ptac.row(i) = tac.row(perm[static_cast<std::size_t>(i)]);
            ptex.row(i) = tex.row(perm[static_cast<std::size_t>(i)]);
        }
        CHECK(loss_value(ptac, ptex, 0.1) == doctest::Approx(base).epsilon(1e-12));
        // Positive rescaling of rows does not matter after normalisation.
        CHECK(loss_value(3.0 * tac, 0.5 * tex, 0.1) == doctest::Approx(base).epsilon(1e-12));
    }
    // Perfectly separated batch: the loss approaches 0 as tau shrinks.
    const Matrix<double> eye = Matrix<double>::Identity(4, 4);
    CHECK(loss_value(eye, eye, 0.01) < 1e-12);
}

TEST_CASE("InfoNCE and tactile encoder gradients match finite differences") {
    Rng rng(4);
    TactileEncoderConfig config;
    config.image_size = 8;
    config.patch_size = 4;
    config.width = 8;
    config.depth = 1;
    config.heads = 2;
    config.embed_dim = 4;
    TactileEncoder<double> encoder(config, rng);
    ag::ParameterList<double> params;
    encoder.collect("enc", params);
    std::vector<Image> images;
    for (int i = 0; i < 3; ++i) {
        Image img(8, 8, 3);
        for (auto& v : img.data) v = static_cast<float>(rng.uniform());
        images.push_back(img);
    }
    const Matrix<double> text = nn::normal_matrix<double>(3, 4, 1.0, rng);
    auto loss = [&](Tape<double>& tape) {
        std::vector<ag::Var<double>> rows;
        for (const auto& img : images) rows.push_back(encoder(tape, img));
        return info_nce_loss(ag::concat_rows<double>(rows), tape.constant(text), 0.5);
    };
    for (const auto& e : testing::gradient_check(params, loss)) {
        CAPTURE(e.name);
        CHECK(e.relative_error < 1e-6);
    }
}

TEST_CASE("single-pair batches give zero loss and zero gradient") {
    Rng rng(5);
    TactileEncoderConfig config;
    config.image_size = 8;
    config.width = 8;
    config.heads = 2;
    config.embed_dim = 4;
    TactileEncoder<double> encoder(config, rng);
    ag::ParameterList<double> params;
    encoder.collect("enc", params);
    Image img(8, 8, 3, 0.3f);
    for (auto& np : params) np.param->zero_grad();
    Tape<double> tape;
    const auto l = info_nce_loss(encoder(tape, img), tape.constant(nn::normal_matrix<double>(1, 4, 1.0, rng)), 0.07);
    CHECK(l.item() == 0.0);
    tape.backward(l);
    for (const auto& np : params) {
        CAPTURE(np.name);
        CHECK(np.param->grad.cwiseAbs().maxCoeff() == 0.0);
    }
}
