#include "touchgen/diffusion/model.hpp"

#include <algorithm>

#include "touchgen/core/checkpoint.hpp"
#include "touchgen/core/errors.hpp"
#include "touchgen/dit/patch.hpp"

namespace touchgen::diffusion {

void ModelConfig::validate() const {
    dit.validate();
    if (conditioner.encoder.dim != dit.cond_dim)
        throw ShapeError("text width " + std::to_string(conditioner.encoder.dim) + " differs from DiT cond_dim " +
                         std::to_string(dit.cond_dim));
    if (conditioner.theta_t < 0 || conditioner.theta_t > dit.timesteps) throw ConfigError("theta_t outside [0, T]");
    make_codec(codec);
}

nlohmann::json to_json(const ModelConfig& c) {
    return {{"dit", dit::to_json(c.dit)},
            {"text", {{"vocab_size", c.conditioner.encoder.vocab_size},
                      {"dim", c.conditioner.encoder.dim},
                      {"heads", c.conditioner.encoder.heads},
                      {"max_length", c.conditioner.encoder.max_length},
                      {"gel_count", c.conditioner.gel_count},
                      {"prompt_length", c.conditioner.prompt_length},
                      {"theta_t", c.conditioner.theta_t}}},
            {"codec", c.codec}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    try {
        c.dit = dit::dit_config_from_json(j.at("dit"));
        const auto& t = j.at("text");
        c.conditioner.encoder.vocab_size = t.at("vocab_size").get<int>();
        c.conditioner.encoder.dim = t.at("dim").get<int>();
        c.conditioner.encoder.heads = t.at("heads").get<int>();
        c.conditioner.encoder.max_length = t.at("max_length").get<int>();
        c.conditioner.gel_count = t.at("gel_count").get<int>();
        c.conditioner.prompt_length = t.at("prompt_length").get<int>();
        c.conditioner.theta_t = t.at("theta_t").get<int>();
        c.codec = j.at("codec").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed model config: ") + e.what());
    }
    c.validate();
    return c;
}

template <class T>
TextToTouchModel<T>::TextToTouchModel(const ModelConfig& config, std::uint64_t seed)
    : config_((config.validate(), config)),
      rng_(derive_seed(seed, 0x5eed)),
      conditioner_(config.conditioner, rng_),
      dit_(config.dit, rng_) {}

template <class T>
ag::ParameterList<T> TextToTouchModel<T>::parameters() {
    ag::ParameterList<T> out;
    conditioner_.collect("text", out);
    dit_.collect("dit", out);
    return out;
}

template class TextToTouchModel<float>;
template class TextToTouchModel<double>;

Matrix<float> to_model_space(const Image& image, const LatentCodec& codec, int patch) {
    Image latent = codec.encode(image);
    for (auto& v : latent.data) v = 2.0f * v - 1.0f;
    return dit::patchify(latent, patch);
}

Image from_model_space(const Matrix<float>& tokens, const LatentCodec& codec, const ModelConfig& config) {
    Image latent = dit::unpatchify(tokens, config.dit.patch_size, config.dit.image_size, config.dit.image_size,
                                   config.dit.in_channels);
    for (auto& v : latent.data) v = 0.5f * (v + 1.0f);
    Image image = codec.decode(latent);
    for (auto& v : image.data) v = std::clamp(v, 0.0f, 1.0f);
    return image;
}

Image sample_image(TextToTouchModel<float>& model, const NoiseSchedule& schedule, const LatentCodec& codec,
                   const text::TokenSequence& tokens, int gel_id, const SampleOptions& options, SampleTrace* trace) {
    const auto& cfg = model.config();
    check_codec_matches(cfg.codec, codec);
    if (schedule.timesteps != model.timesteps()) throw ConfigError("schedule length differs from the model's T");

    text::ConditionValues<float> values;
    {
        Tape<float> tape(false);
        const auto bundle = model.bundle(tape, tokens, gel_id);
        bundle.validate();
        values = text::detach(bundle);
    }

    Rng rng(options.seed);
    Matrix<float> x(cfg.dit.tokens(), cfg.dit.patch_dim());
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = static_cast<float>(rng.normal());

    NoiseFn<float> noise = [&](const Matrix<float>& x_t, int t) {
        GuidanceTrace g;
        Matrix<float> eps = cfg_noise(model, x_t, t, values, options.guidance, options.time_adaptive, &g);
        if (trace) {
            trace->timesteps.push_back(t);
            trace->cond_rows.push_back(g.cond_rows);
        }
        return eps;
    };
    Matrix<float> out = options.sampler == SamplerKind::ddim
                            ? ddim_sample(noise, schedule, std::move(x), DdimOptions{options.steps, options.clip_x0})
                            : ddpm_sample(noise, schedule, std::move(x), rng, options.clip_x0);
    return from_model_space(out, codec, cfg);
}

void save_model(const std::filesystem::path& path, TextToTouchModel<float>& model, const text::Tokenizer& tokenizer,
                const nlohmann::json& extra) {
    nlohmann::json meta = extra;
    meta["kind"] = "text_to_touch";
    meta["model"] = to_json(model.config());
    meta["vocabulary"] = tokenizer.words();
    meta["max_length"] = tokenizer.max_length();
    save_checkpoint(path, meta, model.parameters());
}

LoadedModel load_model(const std::filesystem::path& path) {
    LoadedModel out;
    out.metadata = read_checkpoint_metadata(path);
    if (out.metadata.value("kind", "") != "text_to_touch")
        throw ConfigError(path.string() + " is not a text-to-touch checkpoint");
    const ModelConfig config = model_config_from_json(out.metadata.at("model"));
    out.tokenizer = std::make_unique<text::Tokenizer>(out.metadata.at("vocabulary").get<std::vector<std::string>>(),
                                                      out.metadata.at("max_length").get<int>());
    out.model = std::make_unique<TextToTouchModel<float>>(config, 0);
    load_checkpoint(path, out.model->parameters());
    return out;
}

}  // namespace touchgen::diffusion
