#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "touchgen/diffusion/codec.hpp"
#include "touchgen/diffusion/guidance.hpp"
#include "touchgen/diffusion/sampler.hpp"
#include "touchgen/dit/dit.hpp"
#include "touchgen/text/condition.hpp"

namespace touchgen::diffusion {

using ag::Matrix;
using ag::Tape;
using ag::Var;

struct ModelConfig {
    dit::DiTConfig dit;
    text::ConditionerConfig conditioner;
    std::string codec = "identity";

    void validate() const;
};

nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

// Conditioning stack plus denoiser: the epsilon-prediction network.
template <class T>
class TextToTouchModel {
public:
    TextToTouchModel(const ModelConfig& config, std::uint64_t seed);

    text::ConditionBundle<T> bundle(Tape<T>& tape, const text::TokenSequence& tokens, int gel_id) {
        return conditioner_.bundle(tape, tokens, gel_id);
    }
    Var<T> predict_noise(Tape<T>& tape, const Var<T>& x_t, int t, const text::FusedCondition<T>& cond,
                         dit::ForwardTrace* trace = nullptr) {
        return dit_.forward(tape, x_t, t, cond, trace).eps;
    }
    int timesteps() const { return config_.dit.timesteps; }

    const ModelConfig& config() const { return config_; }
    text::Conditioner<T>& conditioner() { return conditioner_; }
    dit::DiT<T>& backbone() { return dit_; }
    ag::ParameterList<T> parameters();

private:
    ModelConfig config_;
    Rng rng_;
    text::Conditioner<T> conditioner_;
    dit::DiT<T> dit_;
};

// Pixels in [0,1] -> codec latent -> [-1,1] -> patch tokens, and back.
Matrix<float> to_model_space(const Image& image, const LatentCodec& codec, int patch);
Image from_model_space(const Matrix<float>& tokens, const LatentCodec& codec, const ModelConfig& config);

struct SampleOptions {
    SamplerKind sampler = SamplerKind::ddim;
    int steps = 50;
    GuidanceConfig guidance;
    bool time_adaptive = true;
    std::uint64_t seed = 43;
    double clip_x0 = 1.0;
};

struct SampleTrace {
    std::vector<int> timesteps;
    std::vector<int> cond_rows;
};

// A pure function of (parameters, tokens, gel_id, options). gel_id < 0
// samples without gel prompts.
Image sample_image(TextToTouchModel<float>& model, const NoiseSchedule& schedule, const LatentCodec& codec,
                   const text::TokenSequence& tokens, int gel_id, const SampleOptions& options,
                   SampleTrace* trace = nullptr);

struct LoadedModel {
    std::unique_ptr<TextToTouchModel<float>> model;
    std::unique_ptr<text::Tokenizer> tokenizer;
    nlohmann::json metadata;
};

// The header carries the model config, vocabulary and any extra metadata.
void save_model(const std::filesystem::path& path, TextToTouchModel<float>& model, const text::Tokenizer& tokenizer,
                const nlohmann::json& extra = nlohmann::json::object());
LoadedModel load_model(const std::filesystem::path& path);

}  // namespace touchgen::diffusion
