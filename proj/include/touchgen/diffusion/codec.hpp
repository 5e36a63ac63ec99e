#pragma once

#include <memory>
#include <span>
#include <string>

#include "touchgen/core/image.hpp"

namespace touchgen::diffusion {

// First-stage model between pixels and the space the denoiser works in.
class LatentCodec {
public:
    virtual ~LatentCodec() = default;
    virtual std::string name() const = 0;
    virtual int latent_channels(int image_channels) const = 0;
    virtual int latent_size(int image_size) const = 0;
    virtual Image encode(const Image& image) const = 0;
    virtual Image decode(const Image& latent) const = 0;
};

class IdentityCodec final : public LatentCodec {
public:
    std::string name() const override { return "identity"; }
    int latent_channels(int image_channels) const override { return image_channels; }
    int latent_size(int image_size) const override { return image_size; }
    Image encode(const Image& image) const override { return image; }
    Image decode(const Image& latent) const override { return latent; }
};

// 2x2 average pooling down, nearest-neighbour up. Lossy; exists so the
// reconstruction gate has something to reject.
class PoolCodec final : public LatentCodec {
public:
    std::string name() const override { return "pool2"; }
    int latent_channels(int image_channels) const override { return image_channels; }
    int latent_size(int image_size) const override { return image_size / 2; }
    Image encode(const Image& image) const override;
    Image decode(const Image& latent) const override;
};

// "identity" or "pool2"; anything else is a ConfigError.
std::unique_ptr<LatentCodec> make_codec(const std::string& name);

// Mean reconstruction PSNR over the images (peak 1.0, capped at 99 dB).
double reconstruction_psnr(const LatentCodec& codec, std::span<const Image> images);

// Throws ConfigError when the mean PSNR falls below min_psnr; returns it otherwise.
double validate_codec(const LatentCodec& codec, std::span<const Image> images, double min_psnr = 25.0);

// Rejects a checkpoint trained with a different codec.
void check_codec_matches(const std::string& checkpoint_codec, const LatentCodec& codec);

}  // namespace touchgen::diffusion
