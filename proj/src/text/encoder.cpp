#include "touchgen/text/encoder.hpp"

#include <cmath>

#include "touchgen/core/errors.hpp"

namespace touchgen::text {

template <class T>
Matrix<T> sinusoidal_positions(int rows, int dim) {
    if (dim % 2 != 0) throw ConfigError("sinusoidal embedding width must be even");
    Matrix<T> out(rows, dim);
    const int half = dim / 2;
    for (int r = 0; r < rows; ++r)
        for (int i = 0; i < half; ++i) {
            const double freq = std::exp(-std::log(10000.0) * i / half);
            out(r, i) = static_cast<T>(std::sin(r * freq));
            out(r, half + i) = static_cast<T>(std::cos(r * freq));
        }
    return out;
}

template <class T>
TextEncoder<T>::TextEncoder(const TextEncoderConfig& config, Rng& rng)
    : config_(config),
      embedding_(nn::normal_matrix<T>(config.vocab_size, config.dim, 1.0, rng)),
      positions_(sinusoidal_positions<T>(config.max_length, config.dim)),
      norm1_(config.dim),
      norm2_(config.dim),
      norm_out_(config.dim),
      qkv_(config.dim, 3 * config.dim, rng),
      proj_(config.dim, config.dim, rng),
      mlp_(config.dim, 2 * config.dim, config.dim, rng) {
    if (config.vocab_size < 2) throw ConfigError("text encoder needs a vocabulary");
    if (config.dim % config.heads != 0) throw ConfigError("text encoder width must be divisible by heads");
    // Padding never carries meaning.
    embedding_.value.row(Tokenizer::kPad).setZero();
}

template <class T>
Var<T> TextEncoder<T>::operator()(Tape<T>& tape, const TokenSequence& tokens) {
    const auto l = static_cast<Eigen::Index>(tokens.size());
    if (l == 0) return tape.constant(Matrix<T>::Zero(0, config_.dim));
    if (l > positions_.rows()) throw ShapeError("token sequence longer than the encoder's max length");
    for (int id : tokens.ids)
        if (id < 0 || id >= config_.vocab_size) throw IndexError("token id " + std::to_string(id) + " out of range");

    Var<T> x = ag::add(ag::gather_rows<T>(tape.param(embedding_), tokens.ids),
                       tape.constant(positions_.topRows(l)));
    Var<T> qkv = qkv_(tape, norm1_(tape, x));
    const Eigen::Index d = config_.dim;
    Var<T> attn = nn::multi_head_attention(tape, ag::slice_cols(qkv, 0, d), ag::slice_cols(qkv, d, d),
                                           ag::slice_cols(qkv, 2 * d, d), config_.heads);
    x = ag::add(x, proj_(tape, attn));
    x = ag::add(x, mlp_(tape, norm2_(tape, x)));
    return norm_out_(tape, x);
}

template <class T>
void TextEncoder<T>::collect(const std::string& prefix, ParameterList<T>& out) {
    out.push_back({prefix + ".embedding", &embedding_});
    norm1_.collect(prefix + ".norm1", out);
    qkv_.collect(prefix + ".qkv", out);
    proj_.collect(prefix + ".proj", out);
    norm2_.collect(prefix + ".norm2", out);
    mlp_.collect(prefix + ".mlp", out);
    norm_out_.collect(prefix + ".norm_out", out);
}

template <class T>
GelPromptBank<T>::GelPromptBank(int gel_count, int prompt_length, int dim, Rng& rng)
    : prompt_length_(prompt_length), dim_(dim) {
    if (gel_count <= 0) throw ConfigError("prompt bank needs at least one gel status");
    if (prompt_length <= 0 || dim <= 0) throw ConfigError("prompt length and width must be positive");
    prompts_.reserve(static_cast<std::size_t>(gel_count));
    for (int g = 0; g < gel_count; ++g) prompts_.emplace_back(nn::normal_matrix<T>(prompt_length, dim, 1.0, rng));
}

template <class T>
const Matrix<T>& GelPromptBank<T>::prompt(int gel_id) const {
    if (gel_id < 0 || gel_id >= gel_count())
        throw IndexError("gel id " + std::to_string(gel_id) + " outside [0, " + std::to_string(gel_count()) + ")");
    return prompts_[static_cast<std::size_t>(gel_id)].value;
}

template <class T>
Var<T> GelPromptBank<T>::operator()(Tape<T>& tape, int gel_id) {
    prompt(gel_id);
    return tape.param(prompts_[static_cast<std::size_t>(gel_id)]);
}

template <class T>
void GelPromptBank<T>::collect(const std::string& prefix, ParameterList<T>& out) {
    for (std::size_t g = 0; g < prompts_.size(); ++g) out.push_back({prefix + "." + std::to_string(g), &prompts_[g]});
}

template Matrix<float> sinusoidal_positions<float>(int, int);
template Matrix<double> sinusoidal_positions<double>(int, int);
template class TextEncoder<float>;
template class TextEncoder<double>;
template class GelPromptBank<float>;
template class GelPromptBank<double>;

}  // namespace touchgen::text
