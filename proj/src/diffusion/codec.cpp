#include "touchgen/diffusion/codec.hpp"

#include <cmath>
#include <cstdio>

#include "touchgen/core/errors.hpp"

namespace touchgen::diffusion {

Image PoolCodec::encode(const Image& image) const {
    if (image.height % 2 != 0 || image.width % 2 != 0) throw ShapeError("pool2 codec needs even image sides");
    Image out(image.height / 2, image.width / 2, image.channels);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x)
            for (int c = 0; c < image.channels; ++c)
                out.at(y, x, c) = 0.25f * (image.at(2 * y, 2 * x, c) + image.at(2 * y + 1, 2 * x, c) +
                                           image.at(2 * y, 2 * x + 1, c) + image.at(2 * y + 1, 2 * x + 1, c));
    return out;
}

Image PoolCodec::decode(const Image& latent) const {
    Image out(latent.height * 2, latent.width * 2, latent.channels);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x)
            for (int c = 0; c < latent.channels; ++c) out.at(y, x, c) = latent.at(y / 2, x / 2, c);
    return out;
}

std::unique_ptr<LatentCodec> make_codec(const std::string& name) {
    if (name == "identity") return std::make_unique<IdentityCodec>();
    if (name == "pool2") return std::make_unique<PoolCodec>();
    throw ConfigError("unknown latent codec '" + name + "'");
}

double reconstruction_psnr(const LatentCodec& codec, std::span<const Image> images) {
    if (images.empty()) throw DataError("codec validation needs at least one image");
    double total = 0.0;
    for (const auto& img : images) {
        const Image rec = codec.decode(codec.encode(img));
        if (!rec.same_shape(img)) throw ShapeError("codec round trip changed the image shape");
        double se = 0.0;
        for (std::size_t i = 0; i < img.size(); ++i) {
            const double d = static_cast<double>(rec.data[i]) - img.data[i];
            se += d * d;
        }
        const double mse = se / static_cast<double>(img.size());
        total += mse <= 0.0 ? 99.0 : std::min(99.0, -10.0 * std::log10(mse));
    }
    return total / static_cast<double>(images.size());
}

double validate_codec(const LatentCodec& codec, std::span<const Image> images, double min_psnr) {
    const double psnr = reconstruction_psnr(codec, images);
    if (psnr < min_psnr) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "codec '%s' reconstructs at %.2f dB, below the %.1f dB gate", codec.name().c_str(),
                      psnr, min_psnr);
        throw ConfigError(buf);
    }
    return psnr;
}

void check_codec_matches(const std::string& checkpoint_codec, const LatentCodec& codec) {
    if (checkpoint_codec != codec.name())
        throw ConfigError("checkpoint was trained with codec '" + checkpoint_codec + "' but '" + codec.name() +
                          "' is configured");
}

}  // namespace touchgen::diffusion
