#pragma once

// Procedural tactile-like images built from three independent factors:
// texture (a procedural height field), shape (a binary contact mask) and gel
// status (background colour, light direction, tint of the contact signal).

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "touchgen/core/image.hpp"

namespace touchgen::data {

// shape_id value requesting a frame without contact.
inline constexpr int kNoContact = -1;

struct TactileSample {
    std::string id;
    Image image;
    std::string texture_caption;
    std::string shape_caption;
    int gel_id = 0;
    bool contact = true;
    // Generating factors; texture/shape ids are -1 when unknown (e.g. ingested data).
    int texture_id = -1;
    int shape_id = -1;
    std::uint64_t seed = 0;
};

struct GelStatus {
    Eigen::Vector3f background;
    Eigen::Vector2f light_direction;
    // Non-negative entries with row sums <= 1, so [0,1]^3 maps into [0,1]^3.
    Eigen::Matrix3f tint;
};

class GelPalette {
public:
    static constexpr float kMinBackgroundDistance = 0.2f;

    // Deterministic palette with `count` gels; ConfigError if the
    // distinguishability invariant cannot be met.
    static GelPalette make(int count);

    int size() const { return static_cast<int>(gels_.size()); }
    const GelStatus& at(int gel_id) const;
    Eigen::Vector3f apply_tint(int gel_id, const Eigen::Vector3f& rgb) const;
    float min_background_distance() const;

private:
    std::vector<GelStatus> gels_;
};

enum class TextureKind { value_noise, weave };
enum class ShapeKind { circle, stripes, cross, pentagon_tiling };

struct TextureSpec {
    std::string word;
    TextureKind kind = TextureKind::value_noise;
    // Lattice cells across the image (value noise) or weave periods.
    double frequency = 4.0;
    int octaves = 1;
    // Height contrast of the texture inside the contact region.
    double amplitude = 0.5;
};

struct ShapeSpec {
    std::string caption;
    ShapeKind kind = ShapeKind::circle;
};

std::vector<TextureSpec> default_textures();
std::vector<ShapeSpec> default_shapes();

struct GeneratorConfig {
    int image_size = 32;
    int gel_count = 3;
    std::vector<TextureSpec> textures = default_textures();
    std::vector<ShapeSpec> shapes = default_shapes();
    double sensor_noise = 0.01;
};

class TactileGenerator {
public:
    explicit TactileGenerator(GeneratorConfig config);

    // Pure function of its arguments. shape_id == kNoContact yields a
    // background-only frame with empty captions.
    TactileSample generate(int texture_id, int shape_id, int gel_id, std::uint64_t seed) const;

    // Width of the frame border that never contains contact.
    int border() const { return border_; }
    const GeneratorConfig& config() const { return config_; }
    const GelPalette& palette() const { return palette_; }
    std::vector<std::string> texture_vocabulary() const;
    std::vector<std::string> shape_vocabulary() const;

    // Contact mask in [0,1] for a shape (exposed for tests and the border oracle).
    std::vector<float> shape_mask(int shape_id, std::uint64_t seed) const;
    // Texture height field in [0,1].
    std::vector<float> texture_field(int texture_id, std::uint64_t seed) const;

private:
    GeneratorConfig config_;
    GelPalette palette_;
    int border_ = 1;
};

}  // namespace touchgen::data
