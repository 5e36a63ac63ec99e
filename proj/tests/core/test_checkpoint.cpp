#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "touchgen/core/checkpoint.hpp"
#include "touchgen/core/errors.hpp"
#include "touchgen/core/nn.hpp"

using namespace touchgen;

TEST_CASE("checkpoint round trip restores values and metadata") {
    Rng rng(5);
    nn::Linear<float> lin(3, 4, rng);
    lin.bias.value.setConstant(0.5f);
    ag::ParameterList<float> params;
    lin.collect("proj", params);
    const auto path = std::filesystem::temp_directory_path() / "touchgen_ck.bin";
    save_checkpoint(path, {{"kind", "test"}, {"width", 4}}, params);

    nn::Linear<float> other(3, 4, rng);
    ag::ParameterList<float> other_params;
    other.collect("proj", other_params);
    const auto meta = load_checkpoint(path, other_params);
    CHECK(meta.at("kind") == "test");
    CHECK(other.weight.value == lin.weight.value);
    CHECK(other.bias.value == lin.bias.value);
    CHECK(read_checkpoint_metadata(path).at("width") == 4);

    nn::Linear<float> wrong(4, 4, rng);
    ag::ParameterList<float> wrong_params;
    wrong.collect("proj", wrong_params);
    CHECK_THROWS_AS(load_checkpoint(path, wrong_params), ConfigError);
    ag::ParameterList<float> renamed;
    other.collect("other", renamed);
    CHECK_THROWS_AS(load_checkpoint(path, renamed), ConfigError);
    std::filesystem::remove(path);
}

TEST_CASE("corrupt checkpoints are rejected") {
    const auto path = std::filesystem::temp_directory_path() / "touchgen_ck_bad.bin";
    {
        std::ofstream out(path, std::ios::binary);
        out << "garbage!";
    }
    CHECK_THROWS_AS(read_checkpoint_metadata(path), ParseError);
    std::filesystem::remove(path);
}
