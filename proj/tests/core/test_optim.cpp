#include <doctest.h>

#include "touchgen/core/nn.hpp"
#include "touchgen/core/optim.hpp"

using namespace touchgen;
using ag::Matrix;

TEST_CASE("AdamW minimises a quadratic") {
    ag::Parameter<double> w(Matrix<double>::Constant(1, 3, 5.0));
    optim::AdamW<double> opt({{"w", &w}}, {.lr = 0.1, .weight_decay = 0.0});
    for (int i = 0; i < 500; ++i) {
        opt.zero_grad();
        ag::Tape<double> t;
        t.backward(ag::mse(t.param(w), Matrix<double>(Matrix<double>::Ones(1, 3))));
        opt.step();
    }
    CHECK((w.value.array() - 1.0).abs().maxCoeff() < 1e-2);
}

TEST_CASE("untouched parameters are skipped, including weight decay") {
    ag::Parameter<double> used(Matrix<double>::Ones(1, 2));
    ag::Parameter<double> idle(Matrix<double>::Ones(1, 2));
    optim::AdamW<double> opt({{"used", &used}, {"idle", &idle}}, {.lr = 0.1, .weight_decay = 0.5});
    ag::Tape<double> t;
    t.backward(ag::mean_all(t.param(used)));
    opt.step();
    CHECK(idle.value == Matrix<double>::Ones(1, 2));
    CHECK(used.value(0, 0) < 1.0);
}

TEST_CASE("gradient clipping rescales to the max norm") {
    ag::Parameter<double> w(Matrix<double>::Zero(1, 2));
    w.grad = Matrix<double>::Constant(1, 2, 3.0);
    w.touched = true;
    const double norm = ag::clip_grad_norm<double>({{"w", &w}}, 0.01);
    CHECK(norm == doctest::Approx(std::sqrt(18.0)));
    CHECK(w.grad.norm() == doctest::Approx(0.01).epsilon(1e-3));
}

TEST_CASE("warmup is linear then constant") {
    CHECK(optim::warmup_lr(1.0, 0, 10) == doctest::Approx(0.1));
    CHECK(optim::warmup_lr(1.0, 9, 10) == doctest::Approx(1.0));
    CHECK(optim::warmup_lr(1.0, 500, 10) == doctest::Approx(1.0));
}
