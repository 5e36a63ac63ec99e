#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

namespace touchgen {

// Row-major HxWxC float image (also used for latents).
struct Image {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<float> data;

    Image() = default;
    Image(int h, int w, int c, float fill = 0.0f)
        : height(h), width(w), channels(c), data(static_cast<std::size_t>(h) * w * c, fill) {}

    std::size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }

    std::size_t index(int y, int x, int c) const {
        return (static_cast<std::size_t>(y) * width + x) * channels + c;
    }
    float& at(int y, int x, int c) { return data[index(y, x, c)]; }
    float at(int y, int x, int c) const { return data[index(y, x, c)]; }

    bool same_shape(const Image& other) const {
        return height == other.height && width == other.width && channels == other.channels;
    }

    friend bool operator==(const Image&, const Image&) = default;
};

// Quantizes every value to the nearest k/255 after clamping to [0,1], so that
// 8-bit storage is lossless.
void quantize_8bit(Image& image);

// Binary P6, 8-bit, 3 channels. Values are clamped and rounded.
void write_ppm(const std::filesystem::path& path, const Image& image);
Image read_ppm(const std::filesystem::path& path);

// Tiles equally-sized 3-channel images into a grid with `columns` columns.
Image make_grid(const std::vector<Image>& images, int columns);

}  // namespace touchgen
