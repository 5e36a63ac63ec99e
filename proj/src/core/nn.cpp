#include "touchgen/core/nn.hpp"

#include <cmath>
#include <vector>

#include "touchgen/core/errors.hpp"

namespace touchgen::nn {

template <class T>
Matrix<T> xavier_uniform(int rows, int cols, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Matrix<T> m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(rng.uniform(-limit, limit));
    return m;
}

template <class T>
Matrix<T> normal_matrix(int rows, int cols, double stddev, Rng& rng) {
    Matrix<T> m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(stddev * rng.normal());
    return m;
}

template <class T>
Linear<T>::Linear(int in, int out, Rng& rng, Init init)
    : weight(init == Init::zero ? Matrix<T>(Matrix<T>::Zero(in, out)) : xavier_uniform<T>(in, out, rng)),
      bias(Matrix<T>::Zero(1, out)) {}

template <class T>
Var<T> Linear<T>::operator()(Tape<T>& tape, const Var<T>& x) {
    return ag::add_row(ag::matmul(x, tape.param(weight)), tape.param(bias));
}

template <class T>
void Linear<T>::collect(const std::string& prefix, ParameterList<T>& out) {
    out.push_back({prefix + ".weight", &weight});
    out.push_back({prefix + ".bias", &bias});
}

template <class T>
Mlp<T>::Mlp(int in, int hidden, int out, Rng& rng) : fc1(in, hidden, rng), fc2(hidden, out, rng) {}

template <class T>
Var<T> Mlp<T>::operator()(Tape<T>& tape, const Var<T>& x) {
    return fc2(tape, ag::gelu(fc1(tape, x)));
}

template <class T>
void Mlp<T>::collect(const std::string& prefix, ParameterList<T>& out) {
    fc1.collect(prefix + ".fc1", out);
    fc2.collect(prefix + ".fc2", out);
}

template <class T>
AffineLayerNorm<T>::AffineLayerNorm(int features)
    : gain(Matrix<T>::Ones(1, features)), bias(Matrix<T>::Zero(1, features)) {}

template <class T>
Var<T> AffineLayerNorm<T>::operator()(Tape<T>& tape, const Var<T>& x) {
    return ag::add_row(ag::mul_row(ag::layer_norm(x), tape.param(gain)), tape.param(bias));
}

template <class T>
void AffineLayerNorm<T>::collect(const std::string& prefix, ParameterList<T>& out) {
    out.push_back({prefix + ".gain", &gain});
    out.push_back({prefix + ".bias", &bias});
}

template <class T>
Var<T> multi_head_attention(Tape<T>& tape, const Var<T>& q, const Var<T>& k, const Var<T>& v, int heads) {
    const Eigen::Index width = q.cols();
    if (heads <= 0 || width % heads != 0) throw ConfigError("attention width must be divisible by the head count");
    if (k.cols() != width || v.cols() != width || k.rows() != v.rows()) throw ShapeError("attention q/k/v shapes disagree");
    if (k.rows() == 0) return tape.constant(Matrix<T>::Zero(q.rows(), width));
    const Eigen::Index head_dim = width / heads;
    const T inv_sqrt = T(1) / std::sqrt(static_cast<T>(head_dim));
    if (heads == 1) {
        Var<T> weights = ag::softmax_rows(ag::scale(ag::matmul_nt(q, k), inv_sqrt));
        return ag::matmul(weights, v);
    }
    std::vector<Var<T>> outputs;
    outputs.reserve(static_cast<std::size_t>(heads));
    for (int h = 0; h < heads; ++h) {
        const Eigen::Index off = h * head_dim;
        Var<T> qh = ag::slice_cols(q, off, head_dim);
        Var<T> kh = ag::slice_cols(k, off, head_dim);
        Var<T> vh = ag::slice_cols(v, off, head_dim);
        Var<T> weights = ag::softmax_rows(ag::scale(ag::matmul_nt(qh, kh), inv_sqrt));
        outputs.push_back(ag::matmul(weights, vh));
    }
    return ag::concat_cols<T>(outputs);
}

template <class T>
void zero_grad(const ParameterList<T>& params) {
    for (const auto& np : params) np.param->zero_grad();
}

template <class T>
std::size_t parameter_count(const ParameterList<T>& params) {
    std::size_t n = 0;
    for (const auto& np : params) n += static_cast<std::size_t>(np.param->value.size());
    return n;
}

#define TOUCHGEN_NN_INSTANTIATE(T)                                                              \
    template Matrix<T> xavier_uniform<T>(int, int, Rng&);                                       \
    template Matrix<T> normal_matrix<T>(int, int, double, Rng&);                                \
    template struct Linear<T>;                                                                  \
    template struct Mlp<T>;                                                                     \
    template struct AffineLayerNorm<T>;                                                         \
    template Var<T> multi_head_attention(Tape<T>&, const Var<T>&, const Var<T>&, const Var<T>&, int); \
    template void zero_grad(const ParameterList<T>&);                                           \
    template std::size_t parameter_count(const ParameterList<T>&);

TOUCHGEN_NN_INSTANTIATE(float)
TOUCHGEN_NN_INSTANTIATE(double)

#undef TOUCHGEN_NN_INSTANTIATE

}  // namespace touchgen::nn
