#include "touchgen/data/generator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "touchgen/core/errors.hpp"
#include "touchgen/core/rng.hpp"

namespace touchgen::data {

namespace {

constexpr double kPi = std::numbers::pi;

Eigen::Vector3f hsv_to_rgb(float h, float s, float v) {
    h = h - std::floor(h);
    const float c = v * s;
    const float hp = h * 6.0f;
    const float x = c * (1.0f - std::fabs(std::fmod(hp, 2.0f) - 1.0f));
    Eigen::Vector3f rgb;
    switch (static_cast<int>(hp) % 6) {
        case 0: rgb = {c, x, 0}; break;
        case 1: rgb = {x, c, 0}; break;
        case 2: rgb = {0, c, x}; break;
        case 3: rgb = {0, x, c}; break;
        case 4: rgb = {x, 0, c}; break;
        default: rgb = {c, 0, x}; break;
    }
    return rgb.array() + (v - c);
}

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

// Bilinear value noise on a (cells+1)^2 lattice, sampled at (u, v) in [0,1].
class ValueNoise {
public:
    ValueNoise(int cells, Rng& rng) : cells_(std::max(1, cells)), lattice_(static_cast<std::size_t>((cells_ + 1) * (cells_ + 1))) {
        for (double& v : lattice_) v = rng.uniform();
    }

    double operator()(double u, double v) const {
        const double x = std::clamp(u, 0.0, 1.0) * cells_;
        const double y = std::clamp(v, 0.0, 1.0) * cells_;
        const int x0 = std::min(static_cast<int>(x), cells_ - 1);
        const int y0 = std::min(static_cast<int>(y), cells_ - 1);
        const double fx = smoothstep(x - x0), fy = smoothstep(y - y0);
        const double a = at(x0, y0), b = at(x0 + 1, y0), c = at(x0, y0 + 1), d = at(x0 + 1, y0 + 1);
        return (a * (1 - fx) + b * fx) * (1 - fy) + (c * (1 - fx) + d * fx) * fy;
    }

private:
    double at(int x, int y) const { return lattice_[static_cast<std::size_t>(y * (cells_ + 1) + x)]; }
    int cells_;
    std::vector<double> lattice_;
};

bool inside_pentagon(double dx, double dy, double radius, double rotation) {
    const double r = std::hypot(dx, dy);
    if (r > radius) return false;
    const double sector = 2.0 * kPi / 5.0;
    double phi = std::atan2(dy, dx) - rotation;
    phi = phi - sector * std::floor(phi / sector);
    return r <= radius * std::cos(kPi / 5.0) / std::cos(phi - kPi / 5.0);
}

}  // namespace

GelPalette GelPalette::make(int count) {
    if (count < 1) throw ConfigError("gel count must be positive");
    GelPalette palette;
    for (int i = 0; i < count; ++i) {
        GelStatus gel;
        const float hue = 0.62f + static_cast<float>(i) / static_cast<float>(count);
        gel.background = hsv_to_rgb(hue, 0.55f, 0.72f);
        const double angle = 2.0 * kPi * i / count + 0.35;
        gel.light_direction = {static_cast<float>(std::cos(angle)), static_cast<float>(std::sin(angle))};
        const Eigen::Vector3f w = gel.background / gel.background.sum();
        gel.tint = 0.6f * Eigen::Matrix3f::Identity() + 0.4f * Eigen::Vector3f::Ones() * w.transpose();
        palette.gels_.push_back(gel);
    }
    if (palette.min_background_distance() < kMinBackgroundDistance)
        throw ConfigError("cannot build " + std::to_string(count) + " distinguishable gel backgrounds");
    return palette;
}

const GelStatus& GelPalette::at(int gel_id) const {
    if (gel_id < 0 || gel_id >= size())
        throw IndexError("gel id " + std::to_string(gel_id) + " outside [0, " + std::to_string(size()) + ")");
    return gels_[static_cast<std::size_t>(gel_id)];
}

Eigen::Vector3f GelPalette::apply_tint(int gel_id, const Eigen::Vector3f& rgb) const {
    return (at(gel_id).tint * rgb).cwiseMax(0.0f).cwiseMin(1.0f);
}

float GelPalette::min_background_distance() const {
    float best = std::numeric_limits<float>::infinity();
    for (std::size_t i = 0; i < gels_.size(); ++i)
        for (std::size_t j = i + 1; j < gels_.size(); ++j)
            best = std::min(best, (gels_[i].background - gels_[j].background).norm());
    return best;
}

std::vector<TextureSpec> default_textures() {
    return {
        {"smooth", TextureKind::value_noise, 2.0, 1, 0.15},
        {"rough", TextureKind::value_noise, 10.0, 2, 0.9},
        {"bumpy", TextureKind::value_noise, 4.0, 1, 0.9},
        {"knitted", TextureKind::weave, 5.0, 1, 0.8},
    };
}

std::vector<ShapeSpec> default_shapes() {
    return {
        {"a round button", ShapeKind::circle},
        {"a ribbed fabric seam", ShapeKind::stripes},
        {"a cross shaped key", ShapeKind::cross},
        {"a basketball surface", ShapeKind::pentagon_tiling},
    };
}

TactileGenerator::TactileGenerator(GeneratorConfig config)
    : config_(std::move(config)), palette_(GelPalette::make(config_.gel_count)) {
    if (config_.image_size <= 0) throw ConfigError("image size must be positive");
    if (config_.textures.empty() || config_.shapes.empty()) throw ConfigError("texture and shape vocabularies must be non-empty");
    border_ = std::max(1, config_.image_size / 8);
}

std::vector<std::string> TactileGenerator::texture_vocabulary() const {
    std::vector<std::string> out;
    for (const auto& t : config_.textures) out.push_back(t.word);
    return out;
}

std::vector<std::string> TactileGenerator::shape_vocabulary() const {
    std::vector<std::string> out;
    for (const auto& s : config_.shapes) out.push_back(s.caption);
    return out;
}

std::vector<float> TactileGenerator::shape_mask(int shape_id, std::uint64_t seed) const {
    const int size = config_.image_size;
    std::vector<float> mask(static_cast<std::size_t>(size * size), 0.0f);
    if (shape_id == kNoContact) return mask;
    if (shape_id < 0 || shape_id >= static_cast<int>(config_.shapes.size()))
        throw IndexError("shape id " + std::to_string(shape_id) + " outside vocabulary");
    Rng rng(derive_seed(seed, 0x5A4E00ULL + static_cast<std::uint64_t>(shape_id)));
    // Contact stays one pixel inside the border so border shading is zero too.
    const int lo = border_ + 1, hi = size - border_ - 1;
    const double inner = std::max(1, hi - lo);
    const double cx = size / 2.0 + rng.uniform(-0.05, 0.05) * inner;
    const double cy = size / 2.0 + rng.uniform(-0.05, 0.05) * inner;
    const ShapeKind kind = config_.shapes[static_cast<std::size_t>(shape_id)].kind;

    const double radius = inner * rng.uniform(0.28, 0.42);
    const double angle = rng.uniform(0.0, kPi);
    const double period = inner * rng.uniform(0.25, 0.35);
    const double phase = rng.uniform();
    const double arm = inner * rng.uniform(0.10, 0.15);
    const double tile = inner * rng.uniform(0.12, 0.16);
    const double tile_rot = rng.uniform(0.0, 2.0 * kPi / 5.0);

    for (int y = lo; y < hi; ++y) {
        for (int x = lo; x < hi; ++x) {
            const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
            bool on = false;
            switch (kind) {
                case ShapeKind::circle:
                    on = std::hypot(dx, dy) <= radius;
                    break;
                case ShapeKind::stripes: {
                    const double u = (dx * std::cos(angle) + dy * std::sin(angle)) / period + phase;
                    on = u - std::floor(u) < 0.5;
                    break;
                }
                case ShapeKind::cross: {
                    const double u = dx * std::cos(angle / 2) + dy * std::sin(angle / 2);
                    const double v = -dx * std::sin(angle / 2) + dy * std::cos(angle / 2);
                    const double len = inner * 0.45;
                    on = (std::fabs(u) <= arm && std::fabs(v) <= len) || (std::fabs(v) <= arm && std::fabs(u) <= len);
                    break;
                }
                case ShapeKind::pentagon_tiling: {
                    const double spacing = 2.3 * tile;
                    const double row_f = dy / (spacing * 0.87);
                    for (int row = static_cast<int>(std::floor(row_f)) - 1; row <= static_cast<int>(std::floor(row_f)) + 1 && !on; ++row) {
                        const double offset = (row & 1) ? spacing / 2 : 0.0;
                        const double col_f = (dx - offset) / spacing;
                        for (int col = static_cast<int>(std::floor(col_f)) - 1; col <= static_cast<int>(std::floor(col_f)) + 1 && !on; ++col) {
                            const double px = col * spacing + offset, py = row * spacing * 0.87;
                            on = inside_pentagon(dx - px, dy - py, tile, tile_rot);
                        }
                    }
                    break;
                }
            }
            mask[static_cast<std::size_t>(y * size + x)] = on ? 1.0f : 0.0f;
        }
    }
    return mask;
}

std::vector<float> TactileGenerator::texture_field(int texture_id, std::uint64_t seed) const {
    if (texture_id < 0 || texture_id >= static_cast<int>(config_.textures.size()))
        throw IndexError("texture id " + std::to_string(texture_id) + " outside vocabulary");
    const TextureSpec& spec = config_.textures[static_cast<std::size_t>(texture_id)];
    const int size = config_.image_size;
    Rng rng(derive_seed(seed, 0x7E47ULL + static_cast<std::uint64_t>(texture_id)));
    std::vector<float> field(static_cast<std::size_t>(size * size));

    std::vector<ValueNoise> octaves;
    std::vector<double> weights;
    double freq = spec.frequency, weight = 1.0, total = 0.0;
    for (int o = 0; o < std::max(1, spec.octaves); ++o) {
        octaves.emplace_back(static_cast<int>(std::lround(freq)), rng);
        weights.push_back(weight);
        total += weight;
        freq *= 2.0;
        weight *= 0.5;
    }
    const double phase_x = rng.uniform(), phase_y = rng.uniform();
    ValueNoise jitter(3, rng);

    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const double u = (x + 0.5) / size, v = (y + 0.5) / size;
            double value = 0.0;
            if (spec.kind == TextureKind::weave) {
                const double a = std::sin(2.0 * kPi * (spec.frequency * u + phase_x));
                const double b = std::sin(2.0 * kPi * (spec.frequency * v + phase_y));
                value = 0.8 * (0.5 + 0.5 * a * b) + 0.2 * jitter(u, v);
            } else {
                for (std::size_t o = 0; o < octaves.size(); ++o) value += weights[o] * octaves[o](u, v);
                value /= total;
            }
            field[static_cast<std::size_t>(y * size + x)] = static_cast<float>(std::clamp(value, 0.0, 1.0));
        }
    }
    return field;
}

TactileSample TactileGenerator::generate(int texture_id, int shape_id, int gel_id, std::uint64_t seed) const {
    if (texture_id < 0 || texture_id >= static_cast<int>(config_.textures.size()))
        throw IndexError("texture id " + std::to_string(texture_id) + " outside vocabulary");
    if (shape_id != kNoContact && (shape_id < 0 || shape_id >= static_cast<int>(config_.shapes.size())))
        throw IndexError("shape id " + std::to_string(shape_id) + " outside vocabulary");
    const GelStatus& gel = palette_.at(gel_id);
    const int size = config_.image_size;
    const bool contact = shape_id != kNoContact;

    TactileSample sample;
    sample.gel_id = gel_id;
    sample.contact = contact;
    sample.texture_id = contact ? texture_id : -1;
    sample.shape_id = shape_id;
    sample.seed = seed;
    if (contact) {
        sample.texture_caption = config_.textures[static_cast<std::size_t>(texture_id)].word;
        sample.shape_caption = config_.shapes[static_cast<std::size_t>(shape_id)].caption;
    }

    // Height of the gel deformation: mask times texture relief.
    std::vector<float> height(static_cast<std::size_t>(size * size), 0.0f);
    if (contact) {
        const auto mask = shape_mask(shape_id, seed);
        const auto field = texture_field(texture_id, seed);
        const double amp = config_.textures[static_cast<std::size_t>(texture_id)].amplitude;
        for (std::size_t i = 0; i < height.size(); ++i)
            height[i] = static_cast<float>(mask[i] * (0.55 + amp * (field[i] - 0.5)));
    }

    // Three coloured lights 120 degrees apart, anchored at the gel's light direction.
    std::array<Eigen::Vector2f, 3> lights;
    for (int c = 0; c < 3; ++c) {
        const float a = static_cast<float>(2.0 * kPi * c / 3.0);
        const Eigen::Matrix2f rot{{std::cos(a), -std::sin(a)}, {std::sin(a), std::cos(a)}};
        lights[static_cast<std::size_t>(c)] = rot * gel.light_direction;
    }

    Rng noise(derive_seed(seed, 0x0153ULL ^ (static_cast<std::uint64_t>(gel_id) << 8) ^
                                   (static_cast<std::uint64_t>(texture_id) << 16) ^
                                   (static_cast<std::uint64_t>(shape_id + 1) << 24)));
    auto h_at = [&](int y, int x) {
        x = std::clamp(x, 0, size - 1);
        y = std::clamp(y, 0, size - 1);
        return height[static_cast<std::size_t>(y * size + x)];
    };
    sample.image = Image(size, size, 3);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            Eigen::Vector3f signal = Eigen::Vector3f::Zero();
            const bool interior = x >= border_ && x < size - border_ && y >= border_ && y < size - border_;
            if (contact && interior) {
                const float gx = 0.5f * (h_at(y, x + 1) - h_at(y, x - 1));
                const float gy = 0.5f * (h_at(y + 1, x) - h_at(y - 1, x));
                const float h = h_at(y, x);
                for (int c = 0; c < 3; ++c) {
                    const auto& l = lights[static_cast<std::size_t>(c)];
                    signal[c] = 0.4f * h + 0.8f * (gx * l.x() + gy * l.y());
                }
                signal = gel.tint * signal;
            }
            for (int c = 0; c < 3; ++c) {
                const double v = gel.background[c] + signal[c] + config_.sensor_noise * noise.normal();
                sample.image.at(y, x, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
            }
        }
    }
    quantize_8bit(sample.image);
    return sample;
}

}  // namespace touchgen::data
