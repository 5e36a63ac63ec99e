#include <algorithm>
#include <cmath>
#include <string>

#include "touchgen/core/errors.hpp"
#include "touchgen/cttp/cttp.hpp"
#include "touchgen/dit/patch.hpp"

namespace touchgen::cttp {

void TactileEncoderConfig::validate() const {
    if (image_size <= 0 || channels <= 0 || patch_size <= 0 || image_size % patch_size != 0)
        throw ConfigError("tactile encoder: image size must be a positive multiple of the patch size");
    if (width <= 0 || heads <= 0 || width % heads != 0 || width % 4 != 0)
        throw ConfigError("tactile encoder: width must be divisible by heads and by 4");
    if (depth < 0 || embed_dim <= 0) throw ConfigError("tactile encoder: invalid depth or embedding size");
}

template <class T>
TactileEncoder<T>::TactileEncoder(const TactileEncoderConfig& config, Rng& rng) : config_(config) {
    config_.validate();
    const int w = config_.width;
    const int grid = config_.image_size / config_.patch_size;
    patch_embed_ = nn::Linear<T>(config_.patch_size * config_.patch_size * config_.channels, w, rng);
    pos_ = dit::position_embedding_2d<T>(grid, grid, w);
    blocks_.resize(static_cast<std::size_t>(config_.depth));
    for (auto& b : blocks_) {
        b.norm1 = nn::AffineLayerNorm<T>(w);
        b.norm2 = nn::AffineLayerNorm<T>(w);
        b.qkv = nn::Linear<T>(w, 3 * w, rng);
        b.proj = nn::Linear<T>(w, w, rng);
        b.mlp = nn::Mlp<T>(w, 2 * w, w, rng);
    }
    norm_out_ = nn::AffineLayerNorm<T>(w);
    head_ = nn::Linear<T>(w, config_.embed_dim, rng);
}

template <class T>
Var<T> TactileEncoder<T>::operator()(Tape<T>& tape, const Image& image) {
    if (image.height != config_.image_size || image.width != config_.image_size || image.channels != config_.channels)
        throw ShapeError("tactile encoder expects " + std::to_string(config_.image_size) + "x" +
                         std::to_string(config_.image_size) + "x" + std::to_string(config_.channels) + " images");
    Matrix<T> patches = dit::patchify(image, config_.patch_size).template cast<T>();
    patches.array() = patches.array() * T(2) - T(1);
    const Eigen::Index w = config_.width;
    Var<T> x = ag::add(patch_embed_(tape, tape.constant(std::move(patches))), tape.constant(pos_));
    for (auto& b : blocks_) {
        Var<T> qkv = b.qkv(tape, b.norm1(tape, x));
        Var<T> attn = nn::multi_head_attention(tape, ag::slice_cols(qkv, 0, w), ag::slice_cols(qkv, w, w),
                                               ag::slice_cols(qkv, 2 * w, w), config_.heads);
        x = ag::add(x, b.proj(tape, attn));
        x = ag::add(x, b.mlp(tape, b.norm2(tape, x)));
    }
    return head_(tape, ag::mean_rows(norm_out_(tape, x)));
}

template <class T>
void TactileEncoder<T>::collect(const std::string& prefix, ag::ParameterList<T>& out) {
    patch_embed_.collect(prefix + ".patch_embed", out);
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        const std::string p = prefix + ".blocks." + std::to_string(i);
        blocks_[i].norm1.collect(p + ".norm1", out);
        blocks_[i].qkv.collect(p + ".qkv", out);
        blocks_[i].proj.collect(p + ".proj", out);
        blocks_[i].norm2.collect(p + ".norm2", out);
        blocks_[i].mlp.collect(p + ".mlp", out);
    }
    norm_out_.collect(prefix + ".norm_out", out);
    head_.collect(prefix + ".head", out);
}

template class TactileEncoder<float>;
template class TactileEncoder<double>;

template <class T>
Var<T> info_nce_loss(const Var<T>& tactile, const Var<T>& text, double tau) {
    if (!(tau > 0.0)) throw ConfigError("InfoNCE temperature must be positive");
    if (tactile.rows() != text.rows() || tactile.cols() != text.cols())
        throw ShapeError("InfoNCE needs equally shaped tactile and text embeddings");
    if (tactile.rows() < 1) throw ShapeError("InfoNCE needs at least one pair");
    const Var<T> a = ag::l2_normalize_rows(tactile);
    const Var<T> b = ag::l2_normalize_rows(text);
    const T inv_tau = static_cast<T>(1.0 / tau);
    std::vector<int> diag(static_cast<std::size_t>(tactile.rows()));
    for (std::size_t i = 0; i < diag.size(); ++i) diag[i] = static_cast<int>(i);
    const Var<T> tac_to_tex = ag::softmax_cross_entropy(ag::scale(ag::matmul_nt(a, b), inv_tau), diag);
    const Var<T> tex_to_tac = ag::softmax_cross_entropy(ag::scale(ag::matmul_nt(b, a), inv_tau), diag);
    return ag::add(tac_to_tex, tex_to_tac);
}

template Var<float> info_nce_loss(const Var<float>&, const Var<float>&, double);
template Var<double> info_nce_loss(const Var<double>&, const Var<double>&, double);

double cosine(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ShapeError("cosine: vectors differ in length");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na <= 0.0 || nb <= 0.0) throw ScoreError("cosine similarity of a zero-norm embedding");
    return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

}  // namespace touchgen::cttp
