#pragma once

// Reverse-mode automatic differentiation over row-major 2-D matrices.
//
// A Tape records every op evaluated on it; Tape::backward() walks the records
// in reverse and accumulates gradients into Parameter::grad. Every activation
// in the project is a 2-D matrix (tokens x features), so there is no general
// N-d tensor type.
//
// All templates are explicitly instantiated for float (training/inference)
// and double (gradient checks).

#include <Eigen/Core>

#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace touchgen::ag {

template <class T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class T>
struct Parameter {
    Matrix<T> value;
    Matrix<T> grad;
    bool trainable = true;
    // Set when a backward pass wrote into grad since the last zero_grad().
    bool touched = false;

    Parameter() = default;
    explicit Parameter(Matrix<T> v) : value(std::move(v)) {}

    void zero_grad() {
        grad.setZero(value.rows(), value.cols());
        touched = false;
    }
};

template <class T>
struct NamedParameter {
    std::string name;
    Parameter<T>* param;
};

template <class T>
using ParameterList = std::vector<NamedParameter<T>>;

template <class T>
class Tape;

// Lightweight handle to a node on a Tape. Copyable; only valid while the tape lives.
template <class T>
class Var {
public:
    Var() = default;
    Var(Tape<T>* tape, int id) : tape_(tape), id_(id) {}

    const Matrix<T>& value() const;
    Eigen::Index rows() const { return value().rows(); }
    Eigen::Index cols() const { return value().cols(); }
    T item() const;

    Tape<T>* tape() const { return tape_; }
    int id() const { return id_; }
    bool defined() const { return tape_ != nullptr; }

private:
    Tape<T>* tape_ = nullptr;
    int id_ = -1;
};

template <class T>
class Tape {
public:
    using Backward = std::function<void(Tape&, const Matrix<T>& out_value, const Matrix<T>& out_grad)>;

    // With record=false no backward closures are kept (inference mode).
    explicit Tape(bool record = true) : recording_(record) {}
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var<T> constant(Matrix<T> value);
    // One leaf per parameter per tape; repeated calls return the same node.
    Var<T> param(Parameter<T>& p);

    Var<T> record(Matrix<T> value, std::initializer_list<Var<T>> inputs, Backward backward);
    Var<T> record(Matrix<T> value, std::span<const Var<T>> inputs, Backward backward);

    // Seeds d(root)/d(root) = 1 for a 1x1 root and propagates to all parameters.
    void backward(const Var<T>& root);

    bool recording() const { return recording_; }
    bool needs_grad(int id) const { return nodes_[id].needs_grad; }
    const Matrix<T>& value(int id) const { return nodes_[id].value; }
    // Gradient buffer of a node, zero-initialised on first access.
    Matrix<T>& grad(int id);
    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Matrix<T> value;
        Matrix<T> grad;
        Backward backward;
        Parameter<T>* param = nullptr;
        bool needs_grad = false;
    };

    std::vector<Node> nodes_;
    std::unordered_map<Parameter<T>*, int> param_nodes_;
    bool recording_;
};

template <class T>
const Matrix<T>& Var<T>::value() const {
    return tape_->value(id_);
}

template <class T>
T Var<T>::item() const {
    return value()(0, 0);
}

// --- ops -------------------------------------------------------------------

template <class T> Var<T> matmul(const Var<T>& a, const Var<T>& b);
// a * b^T
template <class T> Var<T> matmul_nt(const Var<T>& a, const Var<T>& b);
template <class T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <class T> Var<T> sub(const Var<T>& a, const Var<T>& b);
template <class T> Var<T> mul(const Var<T>& a, const Var<T>& b);
template <class T> Var<T> scale(const Var<T>& a, T factor);
// Broadcasts a 1xC row over every row of a.
template <class T> Var<T> add_row(const Var<T>& a, const Var<T>& row);
template <class T> Var<T> mul_row(const Var<T>& a, const Var<T>& row);
// x * (1 + scale) + shift, with 1xC shift/scale rows.
template <class T> Var<T> modulate(const Var<T>& x, const Var<T>& shift, const Var<T>& scale);
template <class T> Var<T> silu(const Var<T>& a);
// tanh approximation
template <class T> Var<T> gelu(const Var<T>& a);
// Per-row normalisation without affine parameters.
template <class T> Var<T> layer_norm(const Var<T>& a, T eps = T(1e-6));
template <class T> Var<T> softmax_rows(const Var<T>& a);
template <class T> Var<T> concat_rows(std::span<const Var<T>> parts);
template <class T> Var<T> concat_cols(std::span<const Var<T>> parts);
template <class T> Var<T> slice_rows(const Var<T>& a, Eigen::Index start, Eigen::Index count);
template <class T> Var<T> slice_cols(const Var<T>& a, Eigen::Index start, Eigen::Index count);
// 1xC mean over rows; zero row when a has no rows.
template <class T> Var<T> mean_rows(const Var<T>& a);
// Embedding lookup: out.row(i) = table.row(ids[i]).
template <class T> Var<T> gather_rows(const Var<T>& table, std::span<const int> ids);
template <class T> Var<T> l2_normalize_rows(const Var<T>& a);
template <class T> Var<T> mean_all(const Var<T>& a);
// mean((a - target)^2) as a 1x1 node.
template <class T> Var<T> mse(const Var<T>& a, const Matrix<T>& target);
// Mean softmax cross-entropy of each row against an integer label.
template <class T> Var<T> softmax_cross_entropy(const Var<T>& logits, std::span<const int> labels);

// Gradient clipping over the touched parameters; returns the pre-clip global norm.
template <class T> double clip_grad_norm(const ParameterList<T>& params, double max_norm);

}  // namespace touchgen::ag
