#pragma once

// Small building blocks shared by the denoiser, the text encoder and the
// tactile encoder.

#include <string>

#include "touchgen/core/autograd.hpp"
#include "touchgen/core/rng.hpp"

namespace touchgen::nn {

using ag::Matrix;
using ag::Parameter;
using ag::ParameterList;
using ag::Tape;
using ag::Var;

enum class Init { xavier, zero };

template <class T>
Matrix<T> xavier_uniform(int rows, int cols, Rng& rng);
template <class T>
Matrix<T> normal_matrix(int rows, int cols, double stddev, Rng& rng);

// y = x W + b with W stored as in x out.
template <class T>
struct Linear {
    Parameter<T> weight;
    Parameter<T> bias;

    Linear() = default;
    Linear(int in, int out, Rng& rng, Init init = Init::xavier);

    int in_features() const { return static_cast<int>(weight.value.rows()); }
    int out_features() const { return static_cast<int>(weight.value.cols()); }

    Var<T> operator()(Tape<T>& tape, const Var<T>& x);
    void collect(const std::string& prefix, ParameterList<T>& out);
};

// Two linears with a GELU in between.
template <class T>
struct Mlp {
    Linear<T> fc1;
    Linear<T> fc2;

    Mlp() = default;
    Mlp(int in, int hidden, int out, Rng& rng);

    Var<T> operator()(Tape<T>& tape, const Var<T>& x);
    void collect(const std::string& prefix, ParameterList<T>& out);
};

// LayerNorm with learnable per-feature gain and bias.
template <class T>
struct AffineLayerNorm {
    Parameter<T> gain;
    Parameter<T> bias;

    AffineLayerNorm() = default;
    explicit AffineLayerNorm(int features);

    Var<T> operator()(Tape<T>& tape, const Var<T>& x);
    void collect(const std::string& prefix, ParameterList<T>& out);
};

// Scaled dot-product attention split over `heads` column groups of q/k/v.
// Returns the concatenated head outputs (no output projection). With zero
// key rows the result is all zeros.
template <class T>
Var<T> multi_head_attention(Tape<T>& tape, const Var<T>& q, const Var<T>& k, const Var<T>& v, int heads);

template <class T>
void zero_grad(const ParameterList<T>& params);
template <class T>
std::size_t parameter_count(const ParameterList<T>& params);

}  // namespace touchgen::nn
