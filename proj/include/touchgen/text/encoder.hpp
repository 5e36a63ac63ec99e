#pragma once

#include <string>
#include <vector>

#include "touchgen/core/nn.hpp"
#include "touchgen/text/tokenizer.hpp"

namespace touchgen::text {

using ag::Matrix;
using ag::Parameter;
using ag::ParameterList;
using ag::Tape;
using ag::Var;

struct TextEncoderConfig {
    int vocab_size = 0;
    int dim = 64;
    int heads = 2;
    int max_length = Tokenizer::kDefaultMaxLength;
};

// Token embedding + fixed sinusoidal positions + one pre-norm bidirectional
// self-attention layer. Output has one row per token.
template <class T>
class TextEncoder {
public:
    TextEncoder(const TextEncoderConfig& config, Rng& rng);

    Var<T> operator()(Tape<T>& tape, const TokenSequence& tokens);
    const TextEncoderConfig& config() const { return config_; }
    void collect(const std::string& prefix, ParameterList<T>& out);

private:
    TextEncoderConfig config_;
    Parameter<T> embedding_;
    Matrix<T> positions_;
    nn::AffineLayerNorm<T> norm1_, norm2_, norm_out_;
    nn::Linear<T> qkv_, proj_;
    nn::Mlp<T> mlp_;
};

// One independent n_gs x d_c parameter per gel status.
template <class T>
class GelPromptBank {
public:
    GelPromptBank(int gel_count, int prompt_length, int dim, Rng& rng);

    Var<T> operator()(Tape<T>& tape, int gel_id);
    int gel_count() const { return static_cast<int>(prompts_.size()); }
    int prompt_length() const { return prompt_length_; }
    int dim() const { return dim_; }
    const Matrix<T>& prompt(int gel_id) const;
    void collect(const std::string& prefix, ParameterList<T>& out);

private:
    std::vector<Parameter<T>> prompts_;
    int prompt_length_;
    int dim_;
};

// rows x dim table of sin/cos features; dim must be even.
template <class T>
Matrix<T> sinusoidal_positions(int rows, int dim);

}  // namespace touchgen::text
