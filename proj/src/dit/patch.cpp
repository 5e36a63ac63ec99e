#include "touchgen/dit/patch.hpp"

#include <cmath>
#include <string>

#include "touchgen/core/errors.hpp"

namespace touchgen::dit {

namespace {

void check_grid(int height, int width, int patch) {
    if (patch <= 0) throw ShapeError("patch size must be positive");
    if (height % patch != 0 || width % patch != 0)
        throw ShapeError(std::to_string(height) + "x" + std::to_string(width) + " is not divisible by patch size " +
                         std::to_string(patch));
}

}  // namespace

ag::Matrix<float> patchify(const Image& image, int patch) {
    check_grid(image.height, image.width, patch);
    const int gw = image.width / patch;
    const int c = image.channels;
    ag::Matrix<float> tokens((image.height / patch) * gw, patch * patch * c);
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x)
            for (int ch = 0; ch < c; ++ch)
                tokens((y / patch) * gw + x / patch, ((y % patch) * patch + x % patch) * c + ch) = image.at(y, x, ch);
    return tokens;
}

Image unpatchify(const ag::Matrix<float>& tokens, int patch, int height, int width, int channels) {
    check_grid(height, width, patch);
    const int gw = width / patch;
    if (tokens.rows() != (height / patch) * gw || tokens.cols() != patch * patch * channels)
        throw ShapeError("token matrix does not match the requested image shape");
    Image image(height, width, channels);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            for (int ch = 0; ch < channels; ++ch)
                image.at(y, x, ch) = tokens((y / patch) * gw + x / patch, ((y % patch) * patch + x % patch) * channels + ch);
    return image;
}

template <class T>
ag::Matrix<T> position_embedding_2d(int grid_h, int grid_w, int width) {
    if (width % 4 != 0) throw ConfigError("2-D position embedding needs width divisible by 4");
    const int quarter = width / 4;
    ag::Matrix<T> out(grid_h * grid_w, width);
    for (int gy = 0; gy < grid_h; ++gy)
        for (int gx = 0; gx < grid_w; ++gx) {
            const int row = gy * grid_w + gx;
            for (int i = 0; i < quarter; ++i) {
                const double omega = 1.0 / std::pow(10000.0, static_cast<double>(i) / quarter);
                out(row, i) = static_cast<T>(std::sin(gy * omega));
                out(row, quarter + i) = static_cast<T>(std::cos(gy * omega));
                out(row, 2 * quarter + i) = static_cast<T>(std::sin(gx * omega));
                out(row, 3 * quarter + i) = static_cast<T>(std::cos(gx * omega));
            }
        }
    return out;
}

template <class T>
ag::Matrix<T> timestep_sinusoid(int t, int dim) {
    if (dim <= 0 || dim % 2 != 0) throw ConfigError("timestep embedding width must be even");
    const int half = dim / 2;
    ag::Matrix<T> out(1, dim);
    for (int i = 0; i < half; ++i) {
        const double freq = std::exp(-std::log(10000.0) * i / half);
        out(0, i) = static_cast<T>(std::cos(t * freq));
        out(0, half + i) = static_cast<T>(std::sin(t * freq));
    }
    return out;
}

template ag::Matrix<float> position_embedding_2d<float>(int, int, int);
template ag::Matrix<double> position_embedding_2d<double>(int, int, int);
template ag::Matrix<float> timestep_sinusoid<float>(int, int);
template ag::Matrix<double> timestep_sinusoid<double>(int, int);

}  // namespace touchgen::dit
