#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "touchgen/core/image.hpp"
#include "touchgen/core/nn.hpp"

namespace touchgen::cttp {

using ag::Matrix;
using ag::Tape;
using ag::Var;

struct TactileEncoderConfig {
    int image_size = 32;
    int channels = 3;
    int patch_size = 4;
    int width = 32;
    int depth = 2;
    int heads = 4;
    int embed_dim = 32;

    void validate() const;
};

// Small patch transformer: patch embed + 2-D positions, pre-norm blocks,
// mean pool, linear projection to the shared space. Output is unnormalised.
template <class T>
class TactileEncoder {
public:
    TactileEncoder(const TactileEncoderConfig& config, Rng& rng);

    // One 1 x embed_dim row per image.
    Var<T> operator()(Tape<T>& tape, const Image& image);
    const TactileEncoderConfig& config() const { return config_; }
    void collect(const std::string& prefix, ag::ParameterList<T>& out);

private:
    struct Block {
        nn::AffineLayerNorm<T> norm1, norm2;
        nn::Linear<T> qkv, proj;
        nn::Mlp<T> mlp;
    };
    TactileEncoderConfig config_;
    nn::Linear<T> patch_embed_;
    Matrix<T> pos_;
    std::vector<Block> blocks_;
    nn::AffineLayerNorm<T> norm_out_;
    nn::Linear<T> head_;
};

// Frozen caption encoder: idf-weighted sum of fixed pseudo-random word
// vectors. The idf table is fitted once on a caption corpus; words present in
// every caption (the template) carry zero weight.
class TextEmbedder {
public:
    TextEmbedder(int dim, std::uint64_t seed);

    void fit(std::span<const std::string> captions);
    std::vector<double> embed(const std::string& text) const;
    int dim() const { return dim_; }
    std::uint64_t seed() const { return seed_; }
    const std::map<std::string, double>& idf() const { return idf_; }

    nlohmann::json to_json() const;
    static TextEmbedder from_json(const nlohmann::json& j);

private:
    std::vector<double> word_vector(const std::string& word) const;

    int dim_;
    std::uint64_t seed_;
    std::map<std::string, double> idf_;
    double unseen_weight_ = 0.0;
};

// Symmetric InfoNCE: mean_i CE(S_i., i) + mean_j CE(S_.j, j) with
// S = tac tex^T / tau on L2-normalised rows.
template <class T>
Var<T> info_nce_loss(const Var<T>& tactile, const Var<T>& text, double tau);

// Cosine similarity; ScoreError on a zero vector.
double cosine(std::span<const double> a, std::span<const double> b);

struct TexturePrediction {
    std::vector<std::pair<std::string, double>> top;  // descending
    std::pair<std::string, double> lowest;
};

struct CttpConfig {
    TactileEncoderConfig encoder;
    double tau = 0.07;
    std::uint64_t text_seed = 43;
};

class CttpModel {
public:
    CttpModel(const CttpConfig& config, std::uint64_t seed);

    std::vector<double> embed_image(const Image& image);
    std::vector<double> embed_text(const std::string& text) const { return text_.embed(text); }
    // Cosine similarity in [-1, 1].
    double score(const Image& image, const std::string& text);
    TexturePrediction predict_texture(const Image& image, const std::vector<std::string>& textures,
                                      const std::string& shape_caption, int k);

    const CttpConfig& config() const { return config_; }
    TactileEncoder<float>& encoder() { return encoder_; }
    TextEmbedder& text() { return text_; }
    const TextEmbedder& text() const { return text_; }
    ag::ParameterList<float> parameters();

private:
    CttpConfig config_;
    Rng rng_;
    TactileEncoder<float> encoder_;
    TextEmbedder text_;
};

struct CttpTrainConfig {
    int epochs = 40;
    int batch_size = 32;
    double lr = 2e-3;
    double weight_decay = 0.03;
    std::uint64_t seed = 43;
};

struct CttpTrainReport {
    std::vector<double> epoch_loss;
    std::vector<std::string> warnings;
};

struct CaptionedImage {
    Image image;
    std::string caption;
};

// Fits the text embedder on the captions, then trains the tactile encoder.
CttpTrainReport train_cttp(CttpModel& model, std::span<const CaptionedImage> data, const CttpTrainConfig& config);

// Fraction of images whose best-scoring caption among the set's captions is
// textually equal to their own.
double retrieval_at_1(CttpModel& model, std::span<const CaptionedImage> data);

void save_cttp(const std::filesystem::path& path, CttpModel& model, const nlohmann::json& extra = nlohmann::json::object());
std::unique_ptr<CttpModel> load_cttp(const std::filesystem::path& path);

}  // namespace touchgen::cttp
