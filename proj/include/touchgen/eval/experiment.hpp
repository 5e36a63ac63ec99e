#pragma once

#include <cstdint>
#include <set>
#include <string>

#include <json.hpp>

#include "touchgen/cttp/cttp.hpp"
#include "touchgen/diffusion/model.hpp"
#include "touchgen/dit/dit.hpp"
#include "touchgen/text/caption.hpp"

namespace touchgen::eval {

struct TrainSettings {
    long steps = 20000;
    int batch_size = 8;
    double lr = 2e-5;
    long warmup = 1000;
    double weight_decay = 0.03;
    double grad_clip = 0.01;
    double cfg_drop = 0.1;
    // Gate gel prompts by theta_t during training (sampling has its own switch).
    bool time_adaptive = true;
    int log_every = 100;
};

struct SampleSettings {
    std::string sampler = "ddim";
    int steps = 50;
    double cfg_scale = 4.5;
    bool guidance = true;
    bool time_adaptive = true;
};

struct EvalSettings {
    std::string split = "test";
    // 0 evaluates the whole split.
    int max_samples = 0;
};

struct CttpSettings {
    cttp::TactileEncoderConfig encoder;
    double tau = 0.07;
    cttp::CttpTrainConfig train;
};

struct ExperimentConfig {
    std::string dataset_root;
    std::uint64_t seed = 43;
    dit::DiTConfig dit;
    int text_heads = 2;
    int max_length = 32;
    int theta_t = 600;
    int n_gs = 4;
    text::ConditionToggles conditions;
    int timesteps = 1000;
    double beta_start = 1e-4;
    double beta_end = 2e-2;
    std::string codec = "identity";
    TrainSettings train;
    SampleSettings sample;
    EvalSettings eval;
    CttpSettings cttp;

    void validate() const;
};

// ConfigError unless dataset_root names an existing dataset.
void check_paths(const ExperimentConfig& config);

// Reduced backbone and optimiser settings that make 20k-step runs practical on
// one CPU core: patch 4, width 64, depth 4, lr 1e-3.
ExperimentConfig desk_preset();

nlohmann::json to_json(const ExperimentConfig& config);
// Missing keys keep `base` values; unknown keys are a ConfigError. When the
// JSON omits gel_prompt_layers they default to the first half of the blocks.
ExperimentConfig experiment_from_json(const nlohmann::json& j, const ExperimentConfig& base = desk_preset());

// Dotted-path override, e.g. ("train.steps", 500) or ("mechanism", "joint").
void apply_override(ExperimentConfig& config, const std::string& key, const nlohmann::json& value);

// "1-14" / "1,3,5" / "none" -> block set.
std::set<int> parse_layers(const std::string& spec);
std::string format_layers(const std::set<int>& layers);
// "t", "ts", "tsg", "s", ... -> toggles; inverse of format_conditions.
text::ConditionToggles parse_conditions(const std::string& spec);
std::string format_conditions(const text::ConditionToggles& toggles);

diffusion::ModelConfig model_config(const ExperimentConfig& config, int vocab_size, int gel_count);
diffusion::NoiseSchedule schedule(const ExperimentConfig& config);
diffusion::SampleOptions sample_options(const ExperimentConfig& config, std::uint64_t seed);
cttp::CttpConfig cttp_config(const ExperimentConfig& config);

// 16 hex digits of FNV-1a over the canonical JSON dump.
std::string content_hash(const nlohmann::json& j);

}  // namespace touchgen::eval
