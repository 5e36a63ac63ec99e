#include <doctest.h>

#include "touchgen/core/errors.hpp"
#include "touchgen/eval/ablation.hpp"
#include "touchgen/eval/experiment.hpp"

using namespace touchgen;
using namespace touchgen::eval;
using nlohmann::json;

TEST_CASE("base optimiser defaults are unchanged by the preset") {
    const ExperimentConfig c;
    CHECK(c.seed == 43);
    CHECK(c.train.lr == 2e-5);
    CHECK(c.train.warmup == 1000);
    CHECK(c.train.weight_decay == 0.03);
    CHECK(c.train.grad_clip == 0.01);
    CHECK(c.theta_t == 600);
    CHECK(c.n_gs == 4);
    CHECK(c.sample.cfg_scale == 4.5);
}

TEST_CASE("desk preset puts gel prompts in the first half of the blocks") {
    const auto c = desk_preset();
    CHECK(c.dit.depth == 4);
    CHECK(c.dit.gel_prompt_layers == std::set<int>{1, 2});
    c.validate();
}

TEST_CASE("experiment JSON round-trips") {
    ExperimentConfig c = desk_preset();
    c.dit.mechanism = dit::Mechanism::joint;
    c.conditions = {true, false, true};
    c.theta_t = 200;
    c.train.steps = 123;
    const auto back = experiment_from_json(to_json(c));
    CHECK(to_json(back) == to_json(c));
    CHECK(back.conditions == c.conditions);
    CHECK(back.dit.mechanism == dit::Mechanism::joint);
}

TEST_CASE("partial JSON keeps the base values") {
    const auto c = experiment_from_json(json{{"train", {{"steps", 7}}}});
    CHECK(c.train.steps == 7);
    CHECK(c.train.lr == desk_preset().train.lr);
    CHECK(c.dit.width == desk_preset().dit.width);
}

TEST_CASE("depth change re-derives default gel layers unless given") {
    auto c = experiment_from_json(json{{"model", {{"depth", 6}}}});
    CHECK(c.dit.gel_prompt_layers == std::set<int>{1, 2, 3});
    c = experiment_from_json(json{{"model", {{"depth", 6}, {"gel_prompt_layers", "4-6"}}}});
    CHECK(c.dit.gel_prompt_layers == std::set<int>{4, 5, 6});
}

TEST_CASE("unknown or malformed keys are config errors") {
    CHECK_THROWS_AS(experiment_from_json(json{{"trian", {{"steps", 1}}}}), ConfigError);
    CHECK_THROWS_AS(experiment_from_json(json{{"train", {{"stepz", 1}}}}), ConfigError);
    CHECK_THROWS_AS(experiment_from_json(json{{"train", {{"steps", "many"}}}}), ConfigError);
    CHECK_THROWS_AS(experiment_from_json(json{{"model", {{"mechanism", "film"}}}}), ConfigError);
    CHECK_THROWS_AS(experiment_from_json(json{{"conditioning", {{"theta_t", 1001}}}}), ConfigError);
    CHECK_THROWS_AS(experiment_from_json(json{{"conditioning", {{"conditions", "none"}}}}), ConfigError);
}

TEST_CASE("dataset paths are checked on demand") {
    ExperimentConfig c = desk_preset();
    CHECK_THROWS_AS(check_paths(c), ConfigError);
    c.dataset_root = "/nonexistent/touchgen";
    CHECK_THROWS_AS(check_paths(c), ConfigError);
}

TEST_CASE("layer specs parse and format") {
    CHECK(parse_layers("1-3") == std::set<int>{1, 2, 3});
    CHECK(parse_layers("1,3,5") == std::set<int>{1, 3, 5});
    CHECK(parse_layers("1-2,4") == std::set<int>{1, 2, 4});
    CHECK(parse_layers("none").empty());
    CHECK(format_layers({1, 2, 3, 5}) == "1-3,5");
    CHECK(format_layers({}) == "none");
    CHECK_THROWS_AS(parse_layers("0-2"), ConfigError);
    CHECK_THROWS_AS(parse_layers("3-1"), ConfigError);
    CHECK_THROWS_AS(parse_layers("a"), ConfigError);
}

TEST_CASE("condition specs parse and format") {
    CHECK(parse_conditions("texture") == text::ConditionToggles{true, false, false});
    CHECK(parse_conditions("texture+shape") == text::ConditionToggles{true, true, false});
    CHECK(parse_conditions("shape+gel") == text::ConditionToggles{false, true, true});
    CHECK(format_conditions({true, true, true}) == "texture+shape+gel");
    CHECK_THROWS_AS(parse_conditions("texture+colour"), ConfigError);
}

TEST_CASE("overrides accept axis aliases and dotted paths") {
    ExperimentConfig c = desk_preset();
    apply_override(c, "theta_t", 400);
    apply_override(c, "mechanism", "modulation");
    apply_override(c, "layers", "2");
    apply_override(c, "n_gs", 8);
    apply_override(c, "conditions", "texture");
    apply_override(c, "train.steps", 10);
    CHECK(c.theta_t == 400);
    CHECK(c.dit.mechanism == dit::Mechanism::modulation);
    CHECK(c.dit.gel_prompt_layers == std::set<int>{2});
    CHECK(c.n_gs == 8);
    CHECK(c.conditions == text::ConditionToggles{true, false, false});
    CHECK(c.train.steps == 10);
    CHECK_THROWS_AS(apply_override(c, "train.nope", 1), ConfigError);
    CHECK_THROWS_AS(apply_override(c, "n_gs", 0), ConfigError);
}

TEST_CASE("derived model config follows the experiment") {
    ExperimentConfig c = desk_preset();
    c.codec = "pool2";
    const auto m = model_config(c, 20, 3);
    CHECK(m.dit.image_size == 16);
    CHECK(m.conditioner.prompt_length == c.n_gs);
    CHECK(m.conditioner.theta_t == c.theta_t);
    CHECK(m.conditioner.encoder.vocab_size == 20);
    CHECK(m.conditioner.encoder.dim == c.dit.cond_dim);
}

TEST_CASE("content hash is stable and sensitive") {
    const auto a = to_json(desk_preset());
    auto b = a;
    b["seed"] = 44;
    CHECK(content_hash(a) == content_hash(to_json(desk_preset())));
    CHECK(content_hash(a) != content_hash(b));
    CHECK(content_hash(a).size() == 16);
}

TEST_CASE("ablation grids expand to one cell per combination") {
    CHECK(expand_grid(json{{"theta_t", {0, 200, 400, 600, 800}}}).size() == 5);
    CHECK(expand_grid(json{{"n_gs", {1, 2, 4, 6, 8}}}).size() == 5);
    CHECK(expand_grid(json{{"conditions", {"texture", "texture+shape", "texture+shape+gel"}}}).size() == 3);
    CHECK(expand_grid(json{{"mechanism", {"modulation", "joint", "cross"}}, {"layers", {"1", "1-2"}}}).size() == 6);
    CHECK(expand_grid(json{{"train.steps", {1, 2}}}).size() == 2);
}

TEST_CASE("invalid ablation keys are config errors") {
    CHECK_THROWS_AS(expand_grid(json{{"colour", {1}}}), ConfigError);
    CHECK_THROWS_AS(expand_grid(json{{"train.nope", {1}}}), ConfigError);
    CHECK_THROWS_AS(expand_grid(json{{"train", {1}}}), ConfigError);
    CHECK_THROWS_AS(expand_grid(json{{"theta_t", json::array()}}), ConfigError);
    CHECK_THROWS_AS(expand_grid(json::object()), ConfigError);
}
