#include <doctest.h>

#include <filesystem>
#include <limits>

#include "../support/gradcheck.hpp"
#include "touchgen/core/errors.hpp"
#include "touchgen/data/generator.hpp"
#include "touchgen/diffusion/loss.hpp"
#include "touchgen/diffusion/model.hpp"
#include "touchgen/text/caption.hpp"

using namespace touchgen;
using namespace touchgen::diffusion;
using ag::Matrix;
using ag::Tape;
using ag::Var;

namespace {

// Returns a fixed prediction regardless of input; distinguishes the null branch.
struct FixedModel {
    Matrix<double> cond_out;
    Matrix<double> null_out;
    int last_rows = -1;

    int timesteps() const { return 1000; }
    Var<double> predict_noise(Tape<double>& tape, const Var<double>&, int, const text::FusedCondition<double>& c) {
        last_rows = static_cast<int>(c.rows.rows());
        return tape.constant(c.is_null ? null_out : cond_out);
    }
};

text::ConditionValues<double> values(int l, int n_gs) {
    return {Matrix<double>::Ones(l, 4), Matrix<double>::Ones(n_gs, 4).eval(), Matrix<double>::Zero(1, 4), 600, 0};
}

const text::Tokenizer& tokenizer() {
    static const text::Tokenizer tok(text::caption_vocabulary({"a round button"}, {"smooth", "rough"}));
    return tok;
}

ModelConfig tiny_config(dit::Mechanism mech = dit::Mechanism::cross) {
    ModelConfig c;
    c.dit.image_size = 4;
    c.dit.in_channels = 3;
    c.dit.patch_size = 2;
    c.dit.width = 8;
    c.dit.depth = 1;
    c.dit.heads = 2;
    c.dit.mlp_ratio = 2;
    c.dit.cond_dim = 4;
    c.dit.freq_dim = 4;
    c.dit.mechanism = mech;
    c.dit.gel_prompt_layers = {1};
    c.conditioner.encoder.vocab_size = tokenizer().vocab_size();
    c.conditioner.encoder.dim = 4;
    c.conditioner.encoder.heads = 2;
    c.conditioner.gel_count = 2;
    c.conditioner.prompt_length = 2;
    return c;
}

template <class T>
void randomize(ag::ParameterList<T> params, Rng& rng) {
    for (auto& np : params) {
        auto& v = np.param->value;
        v = nn::normal_matrix<T>(static_cast<int>(v.rows()), static_cast<int>(v.cols()), 0.4, rng);
    }
}

}  // namespace

TEST_CASE("training loss against fixed predictions") {
    const auto s = make_schedule(1000);
    Rng rng(1);
    const Matrix<double> x0 = nn::normal_matrix<double>(4, 12, 1.0, rng);
    const Matrix<double> eps = nn::normal_matrix<double>(4, 12, 1.0, rng);
    Tape<double> tape;
    const auto bundle = text::attach(tape, values(5, 2));

    FixedModel exact{eps, eps};
    CHECK(training_loss(tape, exact, s, x0, bundle, 700, eps, false).item() == 0.0);
    CHECK(exact.last_rows == 7);
    training_loss(tape, exact, s, x0, bundle, 100, eps, false);
    CHECK(exact.last_rows == 5);
    training_loss(tape, exact, s, x0, bundle, 100, eps, false, false);
    CHECK(exact.last_rows == 7);
    training_loss(tape, exact, s, x0, bundle, 700, eps, true);
    CHECK(exact.last_rows == 1);

    FixedModel offset{(eps.array() + 1.0).matrix(), eps};
    CHECK(training_loss(tape, offset, s, x0, bundle, 300, eps, false).item() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(training_loss(tape, offset, s, x0, bundle, 300, eps, true).item() == 0.0);

    Matrix<double> nan = eps;
    nan(0, 0) = std::numeric_limits<double>::quiet_NaN();
    FixedModel broken{nan, nan};
    try {
        training_loss(tape, broken, s, x0, bundle, 321, eps, false);
        FAIL("expected a training error");
    } catch (const TrainingError& e) {
        CHECK(std::string(e.what()).find("t=321") != std::string::npos);
    }
}

TEST_CASE("training loss gradients match finite differences") {
    const auto s = make_schedule(1000);
    for (auto mech : {dit::Mechanism::modulation, dit::Mechanism::joint, dit::Mechanism::cross}) {
        CAPTURE(dit::mechanism_name(mech));
        TextToTouchModel<double> model(tiny_config(mech), 7);
        Rng rng(2);
        randomize(model.parameters(), rng);
        const Matrix<double> x0 = nn::normal_matrix<double>(4, 12, 0.5, rng);
        const Matrix<double> eps = nn::normal_matrix<double>(4, 12, 1.0, rng);
        const auto tokens = tokenizer().tokenize("the touch of a round button is rough");
        auto loss = [&](Tape<double>& tape) {
            const auto bundle = model.bundle(tape, tokens, 1);
            auto a = training_loss(tape, model, s, x0, bundle, 800, eps, false);
            auto b = training_loss(tape, model, s, x0, bundle, 200, eps, true);
            return ag::add(a, b);
        };
        for (const auto& e : testing::gradient_check(model.parameters(), loss)) {
            CAPTURE(e.name);
            CHECK(e.relative_error < 1e-4);
        }
    }
}

TEST_CASE("guided noise reduces to either branch at s = 1 and s = 0") {
    Rng rng(3);
    FixedModel model{nn::normal_matrix<double>(2, 3, 1.0, rng), nn::normal_matrix<double>(2, 3, 1.0, rng)};
    const Matrix<double> x = Matrix<double>::Zero(2, 3);
    const auto v = values(3, 2);
    CHECK(cfg_noise(model, x, 500, v, {1.0, true}) == model.cond_out);
    CHECK(cfg_noise(model, x, 500, v, {0.0, true}) == model.null_out);
    CHECK(cfg_noise(model, x, 500, v, {4.5, false}) == model.cond_out);
    const Matrix<double> expected = model.null_out + 4.5 * (model.cond_out - model.null_out);
    CHECK((cfg_noise(model, x, 500, v, {4.5, true}) - expected).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("sampling is deterministic and re-fuses the condition at every step") {
    const auto s = make_schedule(1000);
    TextToTouchModel<float> model(tiny_config(), 4);
    Rng rng(5);
    randomize(model.parameters(), rng);
    const IdentityCodec codec;
    const auto tokens = tokenizer().tokenize("the touch of a round button is smooth");

    SampleOptions opt;
    opt.steps = 50;
    SampleTrace trace;
    const Image a = sample_image(model, s, codec, tokens, 1, opt, &trace);
    const Image b = sample_image(model, s, codec, tokens, 1, opt);
    CHECK(a == b);
    CHECK(a.height == 4);
    CHECK(a.channels == 3);
    for (float v : a.data) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
    }
    REQUIRE(trace.timesteps.size() == 50);
    const int l = static_cast<int>(tokens.size());
    for (std::size_t i = 0; i < 50; ++i) CHECK(trace.cond_rows[i] == (trace.timesteps[i] >= 600 ? 2 + l : l));

    opt.seed = 44;
    CHECK(sample_image(model, s, codec, tokens, 1, opt) != a);

    opt.sampler = SamplerKind::ddpm;
    const auto small = make_schedule(1000);
    CHECK(sample_image(model, small, codec, tokens, 0, opt) == sample_image(model, small, codec, tokens, 0, opt));
}

TEST_CASE("codecs") {
    const IdentityCodec identity;
    const PoolCodec pool;
    data::TactileGenerator gen(data::GeneratorConfig{});
    std::vector<Image> images;
    for (int i = 0; i < 4; ++i) images.push_back(gen.generate(i % 4, 0, i % 3, 100 + i).image);
    CHECK(identity.decode(identity.encode(images[0])) == images[0]);
    CHECK(validate_codec(identity, images) == 99.0);
    const double psnr = reconstruction_psnr(pool, images);
    CHECK(psnr < 99.0);
    CHECK_THROWS_AS(validate_codec(pool, images, psnr + 0.5), ConfigError);
    CHECK(make_codec("pool2")->latent_size(32) == 16);
    CHECK_THROWS_AS(make_codec("vae"), ConfigError);
    CHECK_THROWS_AS(check_codec_matches("pool2", identity), ConfigError);

    auto config = tiny_config();
    CHECK(config.dit.out_channels() == 6);
    config.dit.in_channels = 4;
    CHECK(config.dit.out_channels() == 8);

    const auto s = make_schedule(1000);
    TextToTouchModel<float> model(tiny_config(), 1);
    CHECK_THROWS_AS(sample_image(model, s, pool, tokenizer().tokenize("smooth"), 0, {}), ConfigError);
}

TEST_CASE("model checkpoint round trip") {
    TextToTouchModel<float> model(tiny_config(dit::Mechanism::joint), 9);
    Rng rng(6);
    randomize(model.parameters(), rng);
    const auto path = std::filesystem::temp_directory_path() / "touchgen_model_roundtrip.ckpt";
    save_model(path, model, tokenizer(), {{"note", "roundtrip"}});
    auto loaded = load_model(path);
    CHECK(loaded.metadata.at("note") == "roundtrip");
    CHECK(loaded.tokenizer->words() == tokenizer().words());
    CHECK(loaded.model->config().dit.mechanism == dit::Mechanism::joint);

    const auto s = make_schedule(1000);
    const IdentityCodec codec;
    SampleOptions opt;
    opt.steps = 5;
    const auto tokens = tokenizer().tokenize("the touch of a round button is rough");
    CHECK(sample_image(model, s, codec, tokens, 1, opt) == sample_image(*loaded.model, s, codec, tokens, 1, opt));
    std::filesystem::remove(path);

    auto bad = tiny_config();
    bad.conditioner.encoder.dim = 8;
    CHECK_THROWS_AS(bad.validate(), ShapeError);
}
