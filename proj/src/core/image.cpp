#include "touchgen/core/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "touchgen/core/errors.hpp"

namespace touchgen {

namespace {

unsigned char to_byte(float v) {
    const float clamped = std::clamp(v, 0.0f, 1.0f);
    return static_cast<unsigned char>(std::lround(clamped * 255.0f));
}

// Reads the next whitespace-delimited header token, skipping '#' comments.
std::string next_token(std::istream& in, const std::filesystem::path& path) {
    std::string token;
    while (token.empty()) {
        const int c = in.get();
        if (c == EOF) throw ParseError("truncated PPM header in " + path.string());
        if (c == '#') {
            std::string skip;
            std::getline(in, skip);
            continue;
        }
        if (std::isspace(c)) continue;
        token.push_back(static_cast<char>(c));
        while (in.peek() != EOF && !std::isspace(in.peek())) token.push_back(static_cast<char>(in.get()));
    }
    return token;
}

}  // namespace

void quantize_8bit(Image& image) {
    for (float& v : image.data) v = static_cast<float>(to_byte(v)) / 255.0f;
}

void write_ppm(const std::filesystem::path& path, const Image& image) {
    if (image.channels != 3) throw ShapeError("PPM output requires 3 channels, got " + std::to_string(image.channels));
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open for writing: " + path.string());
    out << "P6\n" << image.width << " " << image.height << "\n255\n";
    std::vector<unsigned char> bytes(image.size());
    std::transform(image.data.begin(), image.data.end(), bytes.begin(), to_byte);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write failed: " + path.string());
}

Image read_ppm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IntegrityError("missing image file: " + path.string());
    if (next_token(in, path) != "P6") throw ParseError("not a binary P6 PPM: " + path.string());
    int width = 0, height = 0, maxval = 0;
    try {
        width = std::stoi(next_token(in, path));
        height = std::stoi(next_token(in, path));
        maxval = std::stoi(next_token(in, path));
    } catch (const std::logic_error&) {
        throw ParseError("malformed PPM header in " + path.string());
    }
    if (maxval != 255 || width <= 0 || height <= 0) throw ParseError("unsupported PPM header in " + path.string());
    in.get();  // single whitespace after maxval
    Image image(height, width, 3);
    std::vector<unsigned char> bytes(image.size());
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (in.gcount() != static_cast<std::streamsize>(bytes.size())) throw ParseError("truncated PPM payload in " + path.string());
    std::transform(bytes.begin(), bytes.end(), image.data.begin(),
                   [](unsigned char b) { return static_cast<float>(b) / 255.0f; });
    return image;
}

Image make_grid(const std::vector<Image>& images, int columns) {
    if (images.empty()) return {};
    if (columns <= 0) throw ConfigError("grid needs at least one column");
    const Image& first = images.front();
    const int cols = std::min<int>(columns, static_cast<int>(images.size()));
    const int rows = (static_cast<int>(images.size()) + cols - 1) / cols;
    Image grid(rows * first.height, cols * first.width, first.channels);
    for (std::size_t i = 0; i < images.size(); ++i) {
        if (!images[i].same_shape(first)) throw ShapeError("grid images must share a shape");
        const int oy = static_cast<int>(i) / cols * first.height;
        const int ox = static_cast<int>(i) % cols * first.width;
        for (int y = 0; y < first.height; ++y)
            for (int x = 0; x < first.width; ++x)
                for (int c = 0; c < first.channels; ++c) grid.at(oy + y, ox + x, c) = images[i].at(y, x, c);
    }
    return grid;
}

}  // namespace touchgen
