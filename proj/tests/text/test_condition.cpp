#include <doctest.h>

#include <limits>
#include <vector>

#include "../support/gradcheck.hpp"
#include "touchgen/core/errors.hpp"
#include "touchgen/core/optim.hpp"
#include "touchgen/text/caption.hpp"
#include "touchgen/text/condition.hpp"

using namespace touchgen;
using namespace touchgen::text;
using ag::Matrix;
using ag::Tape;

namespace {

const Tokenizer& tokenizer() {
    static const Tokenizer tok(caption_vocabulary({"a round button", "a basketball surface"}, {"smooth", "bumpy"}));
    return tok;
}

ConditionerConfig small_config() {
    ConditionerConfig c;
    c.encoder.vocab_size = tokenizer().vocab_size();
    c.encoder.dim = 16;
    c.encoder.heads = 2;
    c.gel_count = 3;
    c.prompt_length = 4;
    c.theta_t = 600;
    return c;
}

Matrix<double> ramp(int rows, int cols, double offset) {
    Matrix<double> m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = offset + r + 0.01 * c;
    return m;
}

}  // namespace

TEST_CASE("fuse_conditions length law and branch contents") {
    Tape<double> tape;
    ConditionBundle<double> b{tape.constant(ramp(10, 8, 0.0)), tape.constant(ramp(4, 8, 100.0)),
                              tape.constant(ramp(1, 8, -5.0)), 600, 1};
    b.validate();

    const auto late = fuse_conditions(b, 800, 1000);
    CHECK(late.rows.rows() == 14);
    CHECK(late.sen_rows == 4);
    CHECK(late.rows.value().topRows(4) == b.c_sen->value());
    CHECK(late.rows.value().bottomRows(10) == b.c_obj.value());

    const auto early = fuse_conditions(b, 599, 1000);
    CHECK(early.rows.rows() == 10);
    CHECK(early.sen_rows == 0);
    CHECK(early.rows.value() == b.c_obj.value());

    CHECK(fuse_conditions(b, 600, 1000).rows.rows() == 14);
    CHECK(fuse_conditions(b, 0, 1000, false).rows.rows() == 14);

    b.theta_t = 0;
    for (int t : {0, 1, 500, 1000}) CHECK(fuse_conditions(b, t, 1000).rows.rows() == 14);

    const auto null = null_condition(b);
    CHECK(null.is_null);
    CHECK(null.rows.rows() == 1);
    CHECK(null.rows.value() == b.null_embedding.value());

    CHECK_THROWS_AS(fuse_conditions(b, -1, 1000), ConfigError);
    CHECK_THROWS_AS(fuse_conditions(b, 1001, 1000), ConfigError);
}

TEST_CASE("fuse_conditions length law holds across thresholds and lengths") {
    for (int l : {0, 1, 7}) {
        for (int theta : {0, 1, 300, 999, 1000}) {
            for (int t = 0; t <= 1000; t += 37) {
                Tape<double> tape;
                ConditionBundle<double> b{tape.constant(ramp(l, 4, 0.0)), tape.constant(ramp(3, 4, 9.0)),
                                          tape.constant(ramp(1, 4, 1.0)), theta, 0};
                CHECK(fuse_conditions(b, t, 1000).rows.rows() == 3 * (t >= theta ? 1 : 0) + l);
            }
        }
    }
}

TEST_CASE("bundle validation") {
    Tape<double> tape;
    ConditionBundle<double> b{tape.constant(ramp(2, 8, 0.0)), tape.constant(ramp(4, 6, 0.0)),
                              tape.constant(ramp(1, 8, 0.0)), 600, 0};
    CHECK_THROWS_AS(b.validate(), ShapeError);
    Matrix<double> bad = ramp(2, 8, 0.0);
    bad(1, 1) = std::numeric_limits<double>::quiet_NaN();
    ConditionBundle<double> c{tape.constant(bad), std::nullopt, tape.constant(ramp(1, 8, 0.0)), 600, 0};
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("text encoder shapes and determinism") {
    Rng rng(3);
    Conditioner<double> cond(small_config(), rng);
    Tape<double> tape(false);
    const auto& tok = tokenizer();

    const auto empty = cond.encoder()(tape, tok.tokenize(""));
    CHECK(empty.rows() == 0);
    CHECK(empty.cols() == 16);

    const auto seq = tok.tokenize("the touch of a round button is smooth");
    const auto a = cond.encoder()(tape, seq);
    const auto b = cond.encoder()(tape, seq);
    CHECK(a.rows() == static_cast<Eigen::Index>(seq.size()));
    CHECK(a.value() == b.value());

    const auto other = cond.encoder()(tape, tok.tokenize("the touch of a round button is bumpy"));
    CHECK((a.value() - other.value()).cwiseAbs().maxCoeff() > 1e-6);

    const auto bundle = cond.bundle(tape, seq, 2);
    bundle.validate();
    REQUIRE(bundle.c_sen);
    CHECK(bundle.c_sen->rows() == 4);
    CHECK(bundle.c_sen->cols() == bundle.c_obj.cols());
    CHECK_FALSE(cond.bundle(tape, seq, -1).c_sen);
    CHECK_THROWS_AS(cond.bundle(tape, seq, 3), IndexError);
}

TEST_CASE("conditioner gradients match finite differences") {
    Rng rng(11);
    auto config = small_config();
    config.encoder.dim = 8;
    Conditioner<double> cond(config, rng);
    ag::ParameterList<double> params;
    cond.collect("cond", params);
    const auto seq = tokenizer().tokenize("the touch of a basketball surface is bumpy");
    const Matrix<double> target = nn::normal_matrix<double>(12, 8, 1.0, rng);
    auto loss = [&](Tape<double>& tape) {
        const auto b = cond.bundle(tape, seq, 1);
        const auto fused = fuse_conditions(b, 900, 1000);
        const Var<double> rows[] = {fused.rows, b.null_embedding};
        Var<double> all = ag::concat_rows<double>(rows);
        return ag::mse(ag::slice_rows(all, 0, 12), target);
    };
    for (const auto& e : testing::gradient_check(params, loss)) {
        CAPTURE(e.name);
        if (e.analytic_norm > 0) CHECK(e.relative_error < 1e-6);
    }
}

TEST_CASE("gel prompt rows are independent parameters") {
    Rng rng(5);
    Conditioner<float> cond([] {
        auto c = small_config();
        return c;
    }(), rng);
    ag::ParameterList<float> params;
    cond.collect("cond", params);
    const Matrix<float> gel1_before = cond.prompts().prompt(1);
    const Matrix<float> gel0_before = cond.prompts().prompt(0);

    optim::AdamW<float> opt(params, {1e-2});
    nn::zero_grad(params);
    {
        Tape<float> tape;
        const auto b = cond.bundle(tape, tokenizer().tokenize("smooth"), 0);
        const auto fused = fuse_conditions(b, 1000, 1000);
        tape.backward(ag::mean_all(ag::mul(fused.rows, fused.rows)));
    }
    opt.step();
    CHECK(cond.prompts().prompt(0) != gel0_before);
    CHECK(cond.prompts().prompt(1) == gel1_before);
}

TEST_CASE("detach and attach preserve the bundle") {
    Rng rng(9);
    Conditioner<float> cond(small_config(), rng);
    Tape<float> tape(false);
    const auto b = cond.bundle(tape, tokenizer().tokenize("the touch of a round button is smooth"), 0);
    const auto values = detach(b);
    Tape<float> other(false);
    const auto again = attach(other, values);
    CHECK(again.c_obj.value() == b.c_obj.value());
    CHECK(again.c_sen->value() == b.c_sen->value());
    CHECK(again.null_embedding.value() == b.null_embedding.value());
    CHECK(again.theta_t == b.theta_t);
    CHECK(again.gel_id == 0);
}
