#include "touchgen/eval/experiment.hpp"

#include <cstdio>
#include <filesystem>
#include <map>
#include <sstream>

#include "touchgen/core/errors.hpp"
#include "touchgen/core/rng.hpp"
#include "touchgen/data/dataset.hpp"

namespace touchgen::eval {

using nlohmann::json;

namespace {

std::set<int> first_half(int depth) {
    std::set<int> layers;
    for (int i = 1; i <= (depth + 1) / 2; ++i) layers.insert(i);
    return layers;
}

// Overlay `patch` onto `target`; every key in `patch` must already exist.
void merge_strict(json& target, const json& patch, const std::string& path) {
    if (!patch.is_object()) throw ConfigError("config section '" + path + "' must be an object");
    for (auto it = patch.begin(); it != patch.end(); ++it) {
        const std::string key = path.empty() ? it.key() : path + "." + it.key();
        if (!target.contains(it.key())) throw ConfigError("unknown config key '" + key + "'");
        json& slot = target[it.key()];
        if (slot.is_object() && it.value().is_object())
            merge_strict(slot, it.value(), key);
        else
            slot = it.value();
    }
}

std::set<int> layers_from_json(const json& j) {
    if (j.is_string()) return parse_layers(j.get<std::string>());
    const auto v = j.get<std::vector<int>>();
    return {v.begin(), v.end()};
}

ExperimentConfig parse_full(const json& j) {
    ExperimentConfig c;
    const json& m = j.at("model");
    c.dataset_root = j.at("dataset_root").get<std::string>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.dit.image_size = m.at("image_size").get<int>();
    c.dit.in_channels = m.at("in_channels").get<int>();
    c.dit.patch_size = m.at("patch_size").get<int>();
    c.dit.width = m.at("width").get<int>();
    c.dit.depth = m.at("depth").get<int>();
    c.dit.heads = m.at("heads").get<int>();
    c.dit.mlp_ratio = m.at("mlp_ratio").get<int>();
    c.dit.cond_dim = m.at("cond_dim").get<int>();
    c.dit.freq_dim = m.at("freq_dim").get<int>();
    c.dit.mechanism = dit::parse_mechanism(m.at("mechanism").get<std::string>());
    c.dit.gel_prompt_layers = layers_from_json(m.at("gel_prompt_layers"));
    c.text_heads = m.at("text_heads").get<int>();
    c.max_length = m.at("max_length").get<int>();
    c.codec = m.at("codec").get<std::string>();

    const json& k = j.at("conditioning");
    c.conditions = parse_conditions(k.at("conditions").get<std::string>());
    c.theta_t = k.at("theta_t").get<int>();
    c.n_gs = k.at("n_gs").get<int>();

    const json& s = j.at("schedule");
    c.timesteps = s.at("timesteps").get<int>();
    c.beta_start = s.at("beta_start").get<double>();
    c.beta_end = s.at("beta_end").get<double>();
    c.dit.timesteps = c.timesteps;

    const json& t = j.at("train");
    c.train.steps = t.at("steps").get<long>();
    c.train.batch_size = t.at("batch_size").get<int>();
    c.train.lr = t.at("lr").get<double>();
    c.train.warmup = t.at("warmup").get<long>();
    c.train.weight_decay = t.at("weight_decay").get<double>();
    c.train.grad_clip = t.at("grad_clip").get<double>();
    c.train.cfg_drop = t.at("cfg_drop").get<double>();
    c.train.time_adaptive = t.at("time_adaptive").get<bool>();
    c.train.log_every = t.at("log_every").get<int>();

    const json& sa = j.at("sample");
    c.sample.sampler = sa.at("sampler").get<std::string>();
    c.sample.steps = sa.at("steps").get<int>();
    c.sample.cfg_scale = sa.at("cfg_scale").get<double>();
    c.sample.guidance = sa.at("guidance").get<bool>();
    c.sample.time_adaptive = sa.at("time_adaptive").get<bool>();

    const json& e = j.at("eval");
    c.eval.split = e.at("split").get<std::string>();
    c.eval.max_samples = e.at("max_samples").get<int>();

    const json& ct = j.at("cttp");
    c.cttp.encoder.patch_size = ct.at("patch_size").get<int>();
    c.cttp.encoder.width = ct.at("width").get<int>();
    c.cttp.encoder.depth = ct.at("depth").get<int>();
    c.cttp.encoder.heads = ct.at("heads").get<int>();
    c.cttp.encoder.embed_dim = ct.at("embed_dim").get<int>();
    c.cttp.encoder.image_size = c.dit.image_size;
    c.cttp.encoder.channels = c.dit.in_channels;
    c.cttp.tau = ct.at("tau").get<double>();
    c.cttp.train.epochs = ct.at("epochs").get<int>();
    c.cttp.train.batch_size = ct.at("batch_size").get<int>();
    c.cttp.train.lr = ct.at("lr").get<double>();
    c.cttp.train.weight_decay = ct.at("weight_decay").get<double>();
    c.cttp.train.seed = c.seed;
    return c;
}

const std::map<std::string, std::string>& aliases() {
    static const std::map<std::string, std::string> table = {
        {"conditions", "conditioning.conditions"},
        {"mechanism", "model.mechanism"},
        {"layers", "model.gel_prompt_layers"},
        {"n_gs", "conditioning.n_gs"},
        {"theta_t", "conditioning.theta_t"},
    };
    return table;
}

}  // namespace

void ExperimentConfig::validate() const {
    if (n_gs <= 0) throw ConfigError("n_gs must be positive");
    if (max_length <= 0) throw ConfigError("max_length must be positive");
    if (text_heads <= 0 || dit.cond_dim % text_heads != 0)
        throw ConfigError("text heads must divide cond_dim");
    if (theta_t < 0 || theta_t > timesteps) throw ConfigError("theta_t outside [0, timesteps]");
    if (!conditions.texture && !conditions.shape && !conditions.gel)
        throw ConfigError("at least one condition type must be enabled");
    if (train.steps < 0 || train.batch_size <= 0) throw ConfigError("train steps/batch_size out of range");
    if (train.lr <= 0.0 || train.warmup < 0 || train.weight_decay < 0.0 || train.grad_clip < 0.0)
        throw ConfigError("optimizer settings out of range");
    if (train.cfg_drop < 0.0 || train.cfg_drop > 1.0) throw ConfigError("cfg_drop must lie in [0, 1]");
    if (train.log_every <= 0) throw ConfigError("log_every must be positive");
    if (sample.steps <= 0) throw ConfigError("sample steps must be positive");
    diffusion::parse_sampler(sample.sampler);
    data::parse_split(eval.split);
    if (eval.max_samples < 0) throw ConfigError("max_samples must be >= 0");
    if (cttp.tau <= 0.0) throw ConfigError("tau must be positive");
    if (cttp.train.epochs < 0 || cttp.train.batch_size <= 0 || cttp.train.lr <= 0.0)
        throw ConfigError("cttp training settings out of range");
    cttp.encoder.validate();
    // Full model validation needs a vocabulary; a placeholder size is enough here.
    model_config(*this, 8, 1).validate();
    schedule(*this).validate();
}

void check_paths(const ExperimentConfig& config) {
    if (config.dataset_root.empty()) throw ConfigError("dataset_root is not set");
    if (!std::filesystem::exists(std::filesystem::path(config.dataset_root) / "manifest.json"))
        throw ConfigError("no dataset at '" + config.dataset_root + "' (manifest.json missing)");
}

ExperimentConfig desk_preset() {
    ExperimentConfig c;
    c.dit.patch_size = 4;
    c.dit.width = 64;
    c.dit.depth = 4;
    c.dit.heads = 4;
    c.dit.gel_prompt_layers = first_half(c.dit.depth);
    c.train.lr = 1e-3;
    return c;
}

json to_json(const ExperimentConfig& c) {
    json j;
    j["dataset_root"] = c.dataset_root;
    j["seed"] = c.seed;
    j["model"] = {{"image_size", c.dit.image_size},
                  {"in_channels", c.dit.in_channels},
                  {"patch_size", c.dit.patch_size},
                  {"width", c.dit.width},
                  {"depth", c.dit.depth},
                  {"heads", c.dit.heads},
                  {"mlp_ratio", c.dit.mlp_ratio},
                  {"cond_dim", c.dit.cond_dim},
                  {"freq_dim", c.dit.freq_dim},
                  {"mechanism", dit::mechanism_name(c.dit.mechanism)},
                  {"gel_prompt_layers", std::vector<int>(c.dit.gel_prompt_layers.begin(), c.dit.gel_prompt_layers.end())},
                  {"text_heads", c.text_heads},
                  {"max_length", c.max_length},
                  {"codec", c.codec}};
    j["conditioning"] = {{"conditions", format_conditions(c.conditions)}, {"theta_t", c.theta_t}, {"n_gs", c.n_gs}};
    j["schedule"] = {{"timesteps", c.timesteps}, {"beta_start", c.beta_start}, {"beta_end", c.beta_end}};
    j["train"] = {{"steps", c.train.steps},
                  {"batch_size", c.train.batch_size},
                  {"lr", c.train.lr},
                  {"warmup", c.train.warmup},
                  {"weight_decay", c.train.weight_decay},
                  {"grad_clip", c.train.grad_clip},
                  {"cfg_drop", c.train.cfg_drop},
                  {"time_adaptive", c.train.time_adaptive},
                  {"log_every", c.train.log_every}};
    j["sample"] = {{"sampler", c.sample.sampler},
                   {"steps", c.sample.steps},
                   {"cfg_scale", c.sample.cfg_scale},
                   {"guidance", c.sample.guidance},
                   {"time_adaptive", c.sample.time_adaptive}};
    j["eval"] = {{"split", c.eval.split}, {"max_samples", c.eval.max_samples}};
    j["cttp"] = {{"patch_size", c.cttp.encoder.patch_size},
                 {"width", c.cttp.encoder.width},
                 {"depth", c.cttp.encoder.depth},
                 {"heads", c.cttp.encoder.heads},
                 {"embed_dim", c.cttp.encoder.embed_dim},
                 {"tau", c.cttp.tau},
                 {"epochs", c.cttp.train.epochs},
                 {"batch_size", c.cttp.train.batch_size},
                 {"lr", c.cttp.train.lr},
                 {"weight_decay", c.cttp.train.weight_decay}};
    return j;
}

ExperimentConfig experiment_from_json(const json& j, const ExperimentConfig& base) {
    json full = to_json(base);
    const bool layers_given = j.is_object() && j.contains("model") && j["model"].is_object() &&
                              j["model"].contains("gel_prompt_layers");
    ExperimentConfig c;
    try {
        merge_strict(full, j, "");
        c = parse_full(full);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed experiment config: ") + e.what());
    }
    if (!layers_given && c.dit.depth != base.dit.depth) c.dit.gel_prompt_layers = first_half(c.dit.depth);
    c.validate();
    return c;
}

void apply_override(ExperimentConfig& config, const std::string& key, const json& value) {
    const auto alias = aliases().find(key);
    const std::string path = alias != aliases().end() ? alias->second : key;
    json patch = value;
    std::string rest = path;
    std::vector<std::string> parts;
    for (std::size_t pos; (pos = rest.find('.')) != std::string::npos; rest = rest.substr(pos + 1))
        parts.push_back(rest.substr(0, pos));
    parts.push_back(rest);
    for (auto it = parts.rbegin(); it != parts.rend(); ++it) patch = json{{*it, patch}};
    config = experiment_from_json(patch, config);
}

std::set<int> parse_layers(const std::string& spec) {
    std::set<int> layers;
    if (spec == "none" || spec.empty()) return layers;
    std::stringstream in(spec);
    for (std::string item; std::getline(in, item, ',');) {
        int lo = 0, hi = 0;
        char dash = 0;
        std::istringstream part(item);
        if (!(part >> lo)) throw ConfigError("bad layer spec '" + spec + "'");
        hi = lo;
        if (part >> dash) {
            if (dash != '-' || !(part >> hi)) throw ConfigError("bad layer spec '" + spec + "'");
        }
        if (lo < 1 || hi < lo) throw ConfigError("bad layer range in '" + spec + "'");
        for (int i = lo; i <= hi; ++i) layers.insert(i);
    }
    return layers;
}

std::string format_layers(const std::set<int>& layers) {
    if (layers.empty()) return "none";
    std::string out;
    auto it = layers.begin();
    while (it != layers.end()) {
        const int lo = *it;
        int hi = lo;
        for (++it; it != layers.end() && *it == hi + 1; ++it) hi = *it;
        if (!out.empty()) out += ",";
        out += std::to_string(lo);
        if (hi != lo) out += "-" + std::to_string(hi);
    }
    return out;
}

text::ConditionToggles parse_conditions(const std::string& spec) {
    text::ConditionToggles t{false, false, false};
    if (spec == "none") return t;
    std::stringstream in(spec);
    for (std::string item; std::getline(in, item, '+');) {
        if (item == "texture")
            t.texture = true;
        else if (item == "shape")
            t.shape = true;
        else if (item == "gel")
            t.gel = true;
        else
            throw ConfigError("unknown condition type '" + item + "' (use texture, shape, gel joined by '+')");
    }
    return t;
}

std::string format_conditions(const text::ConditionToggles& t) {
    std::string out;
    auto add = [&](bool on, const char* name) {
        if (!on) return;
        if (!out.empty()) out += "+";
        out += name;
    };
    add(t.texture, "texture");
    add(t.shape, "shape");
    add(t.gel, "gel");
    return out.empty() ? "none" : out;
}

diffusion::ModelConfig model_config(const ExperimentConfig& c, int vocab_size, int gel_count) {
    diffusion::ModelConfig m;
    m.dit = c.dit;
    m.dit.timesteps = c.timesteps;
    const auto codec = diffusion::make_codec(c.codec);
    m.dit.image_size = codec->latent_size(c.dit.image_size);
    m.dit.in_channels = codec->latent_channels(c.dit.in_channels);
    m.conditioner.encoder.vocab_size = vocab_size;
    m.conditioner.encoder.dim = c.dit.cond_dim;
    m.conditioner.encoder.heads = c.text_heads;
    m.conditioner.encoder.max_length = c.max_length;
    m.conditioner.gel_count = gel_count;
    m.conditioner.prompt_length = c.n_gs;
    m.conditioner.theta_t = c.theta_t;
    m.codec = c.codec;
    return m;
}

diffusion::NoiseSchedule schedule(const ExperimentConfig& c) {
    return diffusion::make_schedule(c.timesteps, diffusion::ScheduleKind::linear, c.beta_start, c.beta_end);
}

diffusion::SampleOptions sample_options(const ExperimentConfig& c, std::uint64_t seed) {
    diffusion::SampleOptions o;
    o.sampler = diffusion::parse_sampler(c.sample.sampler);
    o.steps = c.sample.steps;
    o.guidance.scale = c.sample.cfg_scale;
    o.guidance.enabled = c.sample.guidance;
    o.time_adaptive = c.sample.time_adaptive;
    o.seed = seed;
    return o;
}

cttp::CttpConfig cttp_config(const ExperimentConfig& c) {
    cttp::CttpConfig out;
    out.encoder = c.cttp.encoder;
    out.encoder.image_size = c.dit.image_size;
    out.encoder.channels = c.dit.in_channels;
    out.tau = c.cttp.tau;
    out.text_seed = c.seed;
    return out;
}

std::string content_hash(const json& j) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(j.dump())));
    return buf;
}

}  // namespace touchgen::eval
