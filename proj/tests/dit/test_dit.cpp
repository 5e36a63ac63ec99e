#include <doctest.h>

#include <algorithm>

#include "../support/gradcheck.hpp"
#include "touchgen/core/errors.hpp"
#include "touchgen/dit/dit.hpp"
#include "touchgen/dit/patch.hpp"

using namespace touchgen;
using namespace touchgen::dit;
using ag::Matrix;

namespace {

DiTConfig tiny(Mechanism m) {
    DiTConfig c;
    c.image_size = 4;
    c.in_channels = 2;
    c.patch_size = 2;
    c.width = 8;
    c.depth = 2;
    c.heads = 2;
    c.mlp_ratio = 2;
    c.cond_dim = 4;
    c.freq_dim = 4;
    c.timesteps = 1000;
    c.mechanism = m;
    c.gel_prompt_layers = {1};
    return c;
}

template <class T>
void randomize(ag::ParameterList<T>& params, Rng& rng, const std::string& keep = "") {
    for (auto& np : params) {
        if (!keep.empty() && np.name.find(keep) != std::string::npos) continue;
        auto& v = np.param->value;
        v = nn::normal_matrix<T>(static_cast<int>(v.rows()), static_cast<int>(v.cols()), 0.4, rng);
    }
}

template <class T>
text::ConditionBundle<T> bundle(ag::Tape<T>& tape, const Matrix<T>& obj, const Matrix<T>& sen, int theta) {
    Matrix<T> null = Matrix<T>::Zero(1, obj.cols());
    return {tape.constant(obj), tape.constant(sen), tape.constant(null), theta, 0};
}

constexpr Mechanism kAll[] = {Mechanism::modulation, Mechanism::joint, Mechanism::cross};

}  // namespace

TEST_CASE("mechanism names") {
    for (auto m : kAll) CHECK(parse_mechanism(mechanism_name(m)) == m);
    CHECK_THROWS_AS(parse_mechanism("adapter"), ConfigError);
}

TEST_CASE("config validation and json round trip") {
    auto c = tiny(Mechanism::joint);
    CHECK(dit_config_from_json(to_json(c)).gel_prompt_layers == c.gel_prompt_layers);
    CHECK(to_json(dit_config_from_json(to_json(c))) == to_json(c));
    auto bad = c;
    bad.heads = 3;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.image_size = 5;
    CHECK_THROWS_AS(bad.validate(), ShapeError);
    bad = c;
    bad.gel_prompt_layers = {0};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad.gel_prompt_layers = {3};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    auto j = to_json(c);
    j["mechanism"] = "adapter";
    CHECK_THROWS_AS(dit_config_from_json(j), ConfigError);
}

TEST_CASE("output shape is preserved for every mechanism and condition length") {
    Rng rng(2);
    for (auto mech : kAll) {
        DiT<float> model(tiny(mech), rng);
        ag::ParameterList<float> params;
        model.collect("dit", params);
        randomize(params, rng);
        for (int m : {0, 1, 5}) {
            ag::Tape<float> tape(false);
            text::FusedCondition<float> cond{tape.constant(nn::normal_matrix<float>(m, 4, 1.0, rng)), 0, false};
            auto x = tape.constant(nn::normal_matrix<float>(4, 8, 1.0, rng));
            const auto out = model.forward(tape, x, 500, cond);
            CAPTURE(mechanism_name(mech));
            CHECK(out.eps.rows() == 4);
            CHECK(out.eps.cols() == 8);
            CHECK(out.extra.rows() == 4);
            CHECK(out.extra.cols() == 8);
            CHECK(out.eps.value().allFinite());
        }
    }
}

TEST_CASE("forward rejects bad inputs") {
    Rng rng(3);
    DiT<float> model(tiny(Mechanism::cross), rng);
    ag::Tape<float> tape(false);
    text::FusedCondition<float> cond{tape.constant(Matrix<float>::Zero(2, 4)), 0, false};
    text::FusedCondition<float> wide{tape.constant(Matrix<float>::Zero(2, 5)), 0, false};
    auto x = tape.constant(Matrix<float>::Zero(4, 8));
    CHECK_THROWS_AS(model.forward(tape, x, 1001, cond), ConfigError);
    CHECK_THROWS_AS(model.forward(tape, x, -1, cond), ConfigError);
    CHECK_THROWS_AS(model.forward(tape, x, 10, wide), ShapeError);
    CHECK_THROWS_AS(model.forward(tape, tape.constant(Matrix<float>::Zero(3, 8)), 10, cond), ShapeError);
}

TEST_CASE("joint attention length and discarded condition tokens") {
    Rng rng(4);
    auto config = tiny(Mechanism::joint);
    config.image_size = 32;
    config.in_channels = 4;
    config.depth = 2;
    config.gel_prompt_layers = {1, 2};
    DiT<float> model(config, rng);
    ag::Tape<float> tape(false);
    auto b = bundle<float>(tape, Matrix<float>::Ones(10, 4), Matrix<float>::Ones(4, 4), 600);
    const auto cond = text::fuse_conditions(b, 800, 1000);
    ForwardTrace trace;
    auto x = tape.constant(Matrix<float>::Zero(256, 16));
    model.forward(tape, x, 800, cond, &trace);
    CHECK(trace.attention_length == std::vector<int>{270, 270});
    CHECK(trace.output_tokens == 256);
}

TEST_CASE("blocks outside the gel prompt layers drop the prompt rows") {
    Rng rng(5);
    auto config = tiny(Mechanism::cross);
    config.depth = 28;
    config.gel_prompt_layers.clear();
    for (int i = 1; i <= 14; ++i) config.gel_prompt_layers.insert(i);
    DiT<float> model(config, rng);
    ag::Tape<float> tape(false);
    auto b = bundle<float>(tape, Matrix<float>::Ones(10, 4), Matrix<float>::Ones(4, 4), 600);
    ForwardTrace trace;
    model.forward(tape, tape.constant(Matrix<float>::Zero(4, 8)), 800, text::fuse_conditions(b, 800, 1000), &trace);
    REQUIRE(trace.cond_rows.size() == 28);
    for (int i = 0; i < 14; ++i) CHECK(trace.cond_rows[static_cast<std::size_t>(i)] == 14);
    for (int i = 14; i < 28; ++i) CHECK(trace.cond_rows[static_cast<std::size_t>(i)] == 10);

    ForwardTrace early;
    model.forward(tape, tape.constant(Matrix<float>::Zero(4, 8)), 100, text::fuse_conditions(b, 100, 1000), &early);
    CHECK(std::all_of(early.cond_rows.begin(), early.cond_rows.end(), [](int r) { return r == 10; }));
}

TEST_CASE("zero-initialised gates leave only the embedding and head path") {
    Rng rng(6);
    for (auto mech : kAll) {
        CAPTURE(mechanism_name(mech));
        const auto config = tiny(mech);
        DiT<double> model(config, rng);
        ag::ParameterList<double> params;
        model.collect("dit", params);
        // Everything random except the zero-initialised gates.
        for (auto& np : params) {
            const bool gate = np.name.find(".ada.") != std::string::npos || np.name.find("cross_out") != std::string::npos;
            if (gate) continue;
            auto& v = np.param->value;
            v = nn::normal_matrix<double>(static_cast<int>(v.rows()), static_cast<int>(v.cols()), 0.4, rng);
        }
        auto find = [&](const std::string& name) -> Matrix<double>& {
            for (auto& np : params)
                if (np.name == name) return np.param->value;
            FAIL("missing parameter " << name);
            throw;
        };

        const Matrix<double> x = nn::normal_matrix<double>(4, 8, 1.0, rng);
        const Matrix<double> cond = nn::normal_matrix<double>(3, 4, 1.0, rng);
        ag::Tape<double> tape(false);
        const auto out = model.forward(tape, tape.constant(x), 321, {tape.constant(cond), 0, false});

        // Oracle: patch embed + position, then (since final_ada is random)
        // the modulated layer norm and head. Blocks contribute nothing.
        Matrix<double> h = x * find("dit.patch_embed.weight");
        h.rowwise() += find("dit.patch_embed.bias").row(0);
        h += dit::position_embedding_2d<double>(2, 2, 8);
        Matrix<double> t = dit::timestep_sinusoid<double>(321, 4) * find("dit.t_embed.fc1.weight") +
                           find("dit.t_embed.fc1.bias");
        t = t.unaryExpr([](double v) { return v / (1.0 + std::exp(-v)); });
        t = t * find("dit.t_embed.fc2.weight") + find("dit.t_embed.fc2.bias");
        Matrix<double> c = t;
        if (mech == Mechanism::modulation) {
            // The fused text vector of the last block still shifts the final layer.
            Matrix<double> pooled = cond.colwise().mean();
            Matrix<double> f = pooled * find("dit.blocks.1.fuse1.weight") + find("dit.blocks.1.fuse1.bias");
            f = f.unaryExpr([](double v) { return v / (1.0 + std::exp(-v)); });
            c += f * find("dit.blocks.1.fuse2.weight") + find("dit.blocks.1.fuse2.bias");
        }
        Matrix<double> sc = c.unaryExpr([](double v) { return v / (1.0 + std::exp(-v)); });
        Matrix<double> mod = sc * find("dit.final_ada.weight") + find("dit.final_ada.bias");
        Matrix<double> y(4, 8);
        for (int r = 0; r < 4; ++r) {
            const double mean = h.row(r).mean();
            const double var = (h.row(r).array() - mean).square().mean();
            for (int k = 0; k < 8; ++k)
                y(r, k) = (h(r, k) - mean) / std::sqrt(var + 1e-6) * (1.0 + mod(0, 8 + k)) + mod(0, k);
        }
        Matrix<double> expected = y * find("dit.head.weight");
        expected.rowwise() += find("dit.head.bias").row(0);
        CHECK((out.eps.value() - expected.leftCols(8)).cwiseAbs().maxCoeff() < 1e-10);
        CHECK((out.extra.value() - expected.rightCols(8)).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("cross attention with a zero output projection ignores the condition") {
    Rng rng(7);
    DiT<double> model(tiny(Mechanism::cross), rng);
    ag::ParameterList<double> params;
    model.collect("dit", params);
    randomize(params, rng, "cross_out");
    const Matrix<double> x = nn::normal_matrix<double>(4, 8, 1.0, rng);
    ag::Tape<double> tape(false);
    const auto zero = model.forward(tape, tape.constant(x), 50, {tape.constant(Matrix<double>::Zero(3, 4)), 0, false});
    const auto other =
        model.forward(tape, tape.constant(x), 50, {tape.constant(nn::normal_matrix<double>(5, 4, 1.0, rng)), 0, false});
    CHECK(zero.eps.value() == other.eps.value());
}

TEST_CASE("cross attention is invariant to condition row order") {
    Rng rng(8);
    DiT<double> model(tiny(Mechanism::cross), rng);
    ag::ParameterList<double> params;
    model.collect("dit", params);
    randomize(params, rng);
    const Matrix<double> x = nn::normal_matrix<double>(4, 8, 1.0, rng);
    const Matrix<double> cond = nn::normal_matrix<double>(5, 4, 1.0, rng);
    Matrix<double> permuted(5, 4);
    const int order[] = {3, 0, 4, 1, 2};
    for (int i = 0; i < 5; ++i) permuted.row(i) = cond.row(order[i]);
    ag::Tape<double> tape(false);
    const auto a = model.forward(tape, tape.constant(x), 700, {tape.constant(cond), 0, false});
    const auto b = model.forward(tape, tape.constant(x), 700, {tape.constant(permuted), 0, false});
    CHECK((a.eps.value() - b.eps.value()).cwiseAbs().maxCoeff() < 1e-12);
    const auto c = model.forward(tape, tape.constant(x), 700, {tape.constant(cond * 2.0), 0, false});
    CHECK((a.eps.value() - c.eps.value()).cwiseAbs().maxCoeff() > 1e-6);
}

TEST_CASE("gel prompts change the output only through the gel prompt layers") {
    Rng rng(9);
    for (auto mech : kAll) {
        CAPTURE(mechanism_name(mech));
        for (bool with_layers : {true, false}) {
            auto config = tiny(mech);
            if (!with_layers) config.gel_prompt_layers.clear();
            DiT<double> model(config, rng);
            ag::ParameterList<double> params;
            model.collect("dit", params);
            randomize(params, rng);
            const Matrix<double> x = nn::normal_matrix<double>(4, 8, 1.0, rng);
            const Matrix<double> obj = nn::normal_matrix<double>(6, 4, 1.0, rng);
            const Matrix<double> gel0 = nn::normal_matrix<double>(4, 4, 1.0, rng);
            const Matrix<double> gel1 = nn::normal_matrix<double>(4, 4, 1.0, rng);
            ag::Tape<double> tape(false);
            auto b0 = bundle<double>(tape, obj, gel0, 600);
            auto b1 = bundle<double>(tape, obj, gel1, 600);
            for (int t : {600, 900}) {
                const auto a = model.forward(tape, tape.constant(x), t, text::fuse_conditions(b0, t, 1000));
                const auto b = model.forward(tape, tape.constant(x), t, text::fuse_conditions(b1, t, 1000));
                if (with_layers)
                    CHECK((a.eps.value() - b.eps.value()).cwiseAbs().maxCoeff() > 1e-8);
                else
                    CHECK(a.eps.value() == b.eps.value());
            }
            const auto a = model.forward(tape, tape.constant(x), 599, text::fuse_conditions(b0, 599, 1000));
            const auto b = model.forward(tape, tape.constant(x), 599, text::fuse_conditions(b1, 599, 1000));
            CHECK(a.eps.value() == b.eps.value());
        }
    }
}

TEST_CASE("backbone gradients match finite differences") {
    Rng rng(10);
    for (auto mech : kAll) {
        CAPTURE(mechanism_name(mech));
        DiT<double> model(tiny(mech), rng);
        ag::ParameterList<double> params;
        model.collect("dit", params);
        randomize(params, rng);
        const Matrix<double> x = nn::normal_matrix<double>(4, 8, 1.0, rng);
        const Matrix<double> cond = nn::normal_matrix<double>(5, 4, 1.0, rng);
        const Matrix<double> target = nn::normal_matrix<double>(4, 8, 1.0, rng);
        auto loss = [&](ag::Tape<double>& tape) {
            const auto out = model.forward(tape, tape.constant(x), 640, {tape.constant(cond), 2, false});
            return ag::add(ag::mse(out.eps, target), ag::scale(ag::mean_all(ag::mul(out.extra, out.extra)), 0.1));
        };
        const auto report = testing::gradient_check(params, loss);
        for (const auto& e : report) {
            CAPTURE(e.name);
            CHECK(e.relative_error < 1e-6);
        }
    }
}
