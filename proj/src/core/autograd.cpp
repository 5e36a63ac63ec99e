#include "touchgen/core/autograd.hpp"

#include <cassert>
#include <cmath>
#include <numbers>
#include <string>

#include "touchgen/core/errors.hpp"

namespace touchgen::ag {

// --- tape ------------------------------------------------------------------

template <class T>
Var<T> Tape<T>::constant(Matrix<T> value) {
    nodes_.push_back(Node{std::move(value), {}, {}, nullptr, false});
    return Var<T>(this, static_cast<int>(nodes_.size()) - 1);
}

template <class T>
Var<T> Tape<T>::param(Parameter<T>& p) {
    if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var<T>(this, it->second);
    const bool needs = recording_ && p.trainable;
    nodes_.push_back(Node{p.value, {}, {}, needs ? &p : nullptr, needs});
    const int id = static_cast<int>(nodes_.size()) - 1;
    param_nodes_.emplace(&p, id);
    return Var<T>(this, id);
}

template <class T>
Var<T> Tape<T>::record(Matrix<T> value, std::span<const Var<T>> inputs, Backward backward) {
    bool needs = false;
    if (recording_) {
        for (const auto& in : inputs) {
            assert(in.tape() == this);
            needs = needs || nodes_[in.id()].needs_grad;
        }
    }
    nodes_.push_back(Node{std::move(value), {}, needs ? std::move(backward) : Backward{}, nullptr, needs});
    return Var<T>(this, static_cast<int>(nodes_.size()) - 1);
}

template <class T>
Var<T> Tape<T>::record(Matrix<T> value, std::initializer_list<Var<T>> inputs, Backward backward) {
    return record(std::move(value), std::span<const Var<T>>(inputs.begin(), inputs.size()), std::move(backward));
}

template <class T>
Matrix<T>& Tape<T>::grad(int id) {
    Node& node = nodes_[id];
    if (node.grad.size() == 0) node.grad.setZero(node.value.rows(), node.value.cols());
    return node.grad;
}

template <class T>
void Tape<T>::backward(const Var<T>& root) {
    if (root.tape() != this) throw Error("backward root belongs to another tape");
    if (root.rows() != 1 || root.cols() != 1) throw ShapeError("backward root must be a 1x1 scalar");
    if (!recording_ || !nodes_[root.id()].needs_grad) return;
    grad(root.id()).setOnes();
    for (int id = root.id(); id >= 0; --id) {
        Node& node = nodes_[id];
        if (!node.needs_grad || node.grad.size() == 0) continue;
        if (node.backward) node.backward(*this, node.value, node.grad);
        if (node.param != nullptr) {
            Parameter<T>& p = *node.param;
            if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols()) p.grad.setZero(p.value.rows(), p.value.cols());
            p.grad += node.grad;
            p.touched = true;
        }
    }
}

// --- helpers ---------------------------------------------------------------

namespace {

template <class T>
Tape<T>* same_tape(const Var<T>& a, const Var<T>& b) {
    if (a.tape() != b.tape() || a.tape() == nullptr) throw Error("operands live on different tapes");
    return a.tape();
}

template <class T>
void require_same_shape(const Var<T>& a, const Var<T>& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ShapeError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                         " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
}

template <class T>
void require_row(const Var<T>& a, const Var<T>& row, const char* op) {
    if (row.rows() != 1 || row.cols() != a.cols())
        throw ShapeError(std::string(op) + ": expected 1x" + std::to_string(a.cols()) + " row, got " +
                         std::to_string(row.rows()) + "x" + std::to_string(row.cols()));
}

}  // namespace

// --- ops -------------------------------------------------------------------

template <class T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
    Tape<T>* tape = same_tape(a, b);
    if (a.cols() != b.rows()) throw ShapeError("matmul: inner dimensions differ");
    Matrix<T> out(a.rows(), b.cols());
    out.noalias() = a.value() * b.value();
    const int ia = a.id(), ib = b.id();
    return tape->record(std::move(out), {a, b}, [ia, ib](Tape<T>& t, const Matrix<T>&, const Matrix<T>& g) {
        if (t.needs_grad(ia)) t.grad(ia).noalias() += g * t.value(ib).transpose();
        if (t.needs_grad(ib)) t.grad(ib).noalias() += t.value(ia).transpose() * g;
    });
}

template <class T>
Var<T> matmul_nt(const Var<T>& a, const Var<T>& b) {
    Tape<T>* tape = same_tape(a, b);
    if (a.cols() != b.cols()) throw ShapeError("matmul_nt: inner dimensions differ");
    Matrix<T> out(a.rows(), b.rows());
    out.noalias() = a.value() * b.value().transpose();
    const int ia = a.id(), ib = b.id();
    return tape->record(std::move(out), {a, b}, [ia, ib](Tape<T>& t, const Matrix<T>&, const Matrix<T>& g) {
        if (t.needs_grad(ia)) t.grad(ia).noalias() += g * t.value(ib);
        if (t.needs_grad(ib)) t.grad(ib).noalias() += g.transpose() * t.value(ia);
    });
}

template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
    Tape<T>* tape = same_tape(a, b);
    require_same_shape(a, b, "add");
    const int ia = a.id(), ib = b.id();
    return tape->record(a.value() + b.value(), {a, b}, [ia, ib](Tape<T>& t, const Matrix<T>&, const Matrix<T>& g) {
        if (t.needs_grad(ia)) t.grad(ia) += g;
        if (t.needs_grad(ib)) t.grad(ib) += g;
    });
}

template <class T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
    Tape<T>* tape = same_tape(a, b);
    require_same_shape(a, b, "sub");
    const int ia = a.id(), ib = b.id();
    return tape->record(a.value() - b.value(), {a, b}, [ia, ib](Tape<T>& t, const Matrix<T>&, const Matrix<T>& g) {
        if (t.needs_grad(ia)) t.grad(ia) += g;
        if (t.needs_grad(ib)) t.grad(ib) -= g;
    });
}

template <class T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
    Tape<T>* tape = same_tape(a, b);
    require_same_shape(a, b, "mul");
    const int ia = a.id(), ib = b.id();
    Matrix<T> out = a.value().cwiseProduct(b.value());
    return tape->record(std::move(out), {a, b}, [ia, ib](Tape<T>& t, const Matrix<T>&, const Matrix<T>& g) {
        if (t.needs_grad(ia)) t.grad(ia) += g.cwiseProduct(t.value(ib));
        if (t.needs_grad(ib)) t.grad(ib) += g.cwiseProduct(t.value(ia));
    });
}

template <class T>
Var<T> scale(const Var<T>& a, T factor) {
    const int ia = a.id();
    return a.tape()->record(a.value() * factor, {a}, [ia, factor](Tape<T>& t, const Matrix<T>&, const Matrix<T>& g) {
        t.grad(ia) += g * factor;
    });
}

template <class T>
Var<T> add_row(const Var<T>& a, const Var<T>& row) {
    Tape<T>* tape = same_tape(a, row);
    require_row(a, row, "add_row");
    Matrix<T> out = a.value();
    out.rowwise() += row.value().row(0);
    const int ia = a.id(), ir = row.id();
    return tape->record(std::move(out), {a, row}, [ia, ir](Tape<T>& t, const Matrix<T>&, const Matrix<T>& g) {
        if (t.needs_grad(ia)) t.grad(ia) += g;
        if (t.needs_grad(ir)) t.grad(ir) += g.colwise().sum();
    });
}

template <class T>
Var<T> mul_row(const Var<T>& a, const Var<T>& row) {
    Tape<T>* tape = same_tape(a, row);
    require_row(a, row, "mul_row");
    Matrix<T> out = a.value().array().rowwise() * row.value().row(0).array();
    const int ia = a.id(), ir = row.id();
    return tape->record(std::move(out), {a, row}, [ia, ir](Tape<T>& t, const Matrix<T>&, const Matrix<T>& g) {
        if (t.needs_grad(ia)) t.grad(ia).array() += g.array().rowwise() * t.value(ir).row(0).array();
        if (t.needs_grad(ir)) t.grad(ir) += g.cwiseProduct(t.value(ia)).colwise().sum();
    });
}

template <class T>
Var<T> modulate(const Var<T>& x, const Var<T>& shift, const Var<T>& scale_row) {
    Tape<T>* tape = same_tape(x, shift);
    same_tape(x, scale_row);
    require_row(x, shift, "modulate");
    require_row(x, scale_row, "modulate");
    Matrix<T> out = x.value().array().rowwise() * (scale_row.value().row(0).array() + T(1));
    out.rowwise() += shift.value().row(0);
    const int ix = x.id(), ish = shift.id(), isc = scale_row.id();
    return tape->record(std::move(out), {x, shift, scale_row},
                        [ix, ish, isc](Tape<T>& t, const Matrix<T>&, const Matrix<T>& g) {
                            if (t.needs_grad(ix))
                                t.grad(ix).array() += g.array().rowwise() * (t.value(isc).row(0).array() + T(1));
                            if (t.needs_grad(ish)) t.grad(ish) += g.colwise().sum();
                            if (t.needs_grad(isc)) t.grad(isc) += g.cwiseProduct(t.value(ix)).colwise().sum();
                        });
}

template <class T>
Var<T> silu(const Var<T>& a) {
    const int ia = a.id();
    const auto x = a.value().array();
    Matrix<T> sig = (T(1) / (T(1) + (-x).exp())).matrix();
    Matrix<T> out = (x * sig.array()).matrix();
    return a.tape()->record(std::move(out), {a}, [ia, sig = std::move(sig)](Tape<T>& t, const Matrix<T>&, const Matrix<T>& g) {
        const auto s = sig.array();
        t.grad(ia).array() += g.array() * s * (T(1) + t.value(ia).array() * (T(1) - s));
    });
}

template <class T>
Var<T> gelu(const Var<T>& a) {
    static constexpr T k0 = T(0.7978845608028654);  // sqrt(2/pi)
    static constexpr T k1 = T(0.044715);
    const int ia = a.id();
    const auto x = a.value().array();
    Matrix<T> th = (k0 * (x + k1 * x.cube())).tanh().matrix();
    Matrix<T> out = (T(0.5) * x * (T(1) + th.array())).matrix();
    return a.tape()->record(std::move(out), {a}, [ia, th = std::move(th)](Tape<T>& t, const Matrix<T>&, const Matrix<T>& g) {
        const auto v = t.value(ia).array();
        const auto h = th.array();
        t.grad(ia).array() +=
            g.array() * (T(0.5) * (T(1) + h) + T(0.5) * v * (T(1) - h.square()) * k0 * (T(1) + T(3) * k1 * v.square()));
    });
}

template <class T>
Var<T> layer_norm(const Var<T>& a, T eps) {
    const Matrix<T>& x = a.value();
    const Eigen::Index n = x.cols();
    Matrix<T> out(x.rows(), n);
    Eigen::Matrix<T, Eigen::Dynamic, 1> inv_std(x.rows());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const T mean = x.row(r).mean();
        const T var = (x.row(r).array() - mean).square().mean();
        inv_std(r) = T(1) / std::sqrt(var + eps);
        out.row(r) = (x.row(r).array() - mean) * inv_std(r);
    }
    const int ia = a.id();
    return a.tape()->record(std::move(out), {a},
                            [ia, inv_std, n](Tape<T>& t, const Matrix<T>& y, const Matrix<T>& g) {
                                Matrix<T>& dx = t.grad(ia);
                                for (Eigen::Index r = 0; r < y.rows(); ++r) {
                                    const T mean_g = g.row(r).mean();
                                    const T mean_gy = g.row(r).dot(y.row(r)) / static_cast<T>(n);
                                    dx.row(r).array() += inv_std(r) * (g.row(r).array() - mean_g - y.row(r).array() * mean_gy);
                                }
                            });
}

template <class T>
Var<T> softmax_rows(const Var<T>& a) {
    Matrix<T> out = a.value();
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
        const T mx = out.row(r).maxCoeff();
        out.row(r) = (out.row(r).array() - mx).exp();
        out.row(r) /= out.row(r).sum();
    }
    const int ia = a.id();
    return a.tape()->record(std::move(out), {a}, [ia](Tape<T>& t, const Matrix<T>& y, const Matrix<T>& g) {
        Matrix<T>& dx = t.grad(ia);
        for (Eigen::Index r = 0; r < y.rows(); ++r) {
            const T dot = g.row(r).dot(y.row(r));
            dx.row(r).array() += y.row(r).array() * (g.row(r).array() - dot);
        }
    });
}

template <class T>
Var<T> concat_rows(std::span<const Var<T>> parts) {
    if (parts.empty()) throw ShapeError("concat_rows: no inputs");
    Tape<T>* tape = parts.front().tape();
    const Eigen::Index cols = parts.front().cols();
    Eigen::Index rows = 0;
    for (const auto& p : parts) {
        if (p.tape() != tape) throw Error("operands live on different tapes");
        if (p.cols() != cols) throw ShapeError("concat_rows: column count mismatch");
        rows += p.rows();
    }
    Matrix<T> out(rows, cols);
    std::vector<int> ids;
    std::vector<Eigen::Index> offsets;
    Eigen::Index off = 0;
    for (const auto& p : parts) {
        if (p.rows() > 0) out.middleRows(off, p.rows()) = p.value();
        ids.push_back(p.id());
        offsets.push_back(off);
        off += p.rows();
    }
    return tape->record(std::move(out), parts,
                        [ids, offsets](Tape<T>& t, const Matrix<T>&, const Matrix<T>& g) {
                            for (std::size_t i = 0; i < ids.size(); ++i) {
                                const Eigen::Index r = t.value(ids[i]).rows();
                                if (r > 0 && t.needs_grad(ids[i])) t.grad(ids[i]) += g.middleRows(offsets[i], r);
                            }
                        });
}

template <class T>
Var<T> concat_cols(std::span<const Var<T>> parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no inputs");
    Tape<T>* tape = parts.front().tape();
    const Eigen::Index rows = parts.front().rows();
    Eigen::Index cols = 0;
    for (const auto& p : parts) {
        if (p.tape() != tape) throw Error("operands live on different tapes");
        if (p.rows() != rows) throw ShapeError("concat_cols: row count mismatch");
        cols += p.cols();
    }
    Matrix<T> out(rows, cols);
    std::vector<int> ids;
    std::vector<Eigen::Index> offsets;
    Eigen::Index off = 0;
    for (const auto& p : parts) {
        if (p.cols() > 0) out.middleCols(off, p.cols()) = p.value();
        ids.push_back(p.id());
        offsets.push_back(off);
        off += p.cols();
    }
    return tape->record(std::move(out), parts,
                        [ids, offsets](Tape<T>& t, const Matrix<T>&, const Matrix<T>& g) {
                            for (std::size_t i = 0; i < ids.size(); ++i) {
                                const Eigen::Index c = t.value(ids[i]).cols();
                                if (c > 0 && t.needs_grad(ids[i])) t.grad(ids[i]) += g.middleCols(offsets[i], c);
                            }
                        });
}

template <class T>
Var<T> slice_rows(const Var<T>& a, Eigen::Index start, Eigen::Index count) {
    if (start < 0 || count < 0 || start + count > a.rows()) throw ShapeError("slice_rows: range out of bounds");
    const int ia = a.id();
    Matrix<T> out = a.value().middleRows(start, count);
    return a.tape()->record(std::move(out), {a}, [ia, start, count](Tape<T>& t, const Matrix<T>&, const Matrix<T>& g) {
        if (count > 0) t.grad(ia).middleRows(start, count) += g;
    });
}

template <class T>
Var<T> slice_cols(const Var<T>& a, Eigen::Index start, Eigen::Index count) {
    if (start < 0 || count < 0 || start + count > a.cols()) throw ShapeError("slice_cols: range out of bounds");
    const int ia = a.id();
    Matrix<T> out = a.value().middleCols(start, count);
    return a.tape()->record(std::move(out), {a}, [ia, start, count](Tape<T>& t, const Matrix<T>&, const Matrix<T>& g) {
        if (count > 0) t.grad(ia).middleCols(start, count) += g;
    });
}

template <class T>
Var<T> mean_rows(const Var<T>& a) {
    const Eigen::Index rows = a.rows();
    Matrix<T> out = Matrix<T>::Zero(1, a.cols());
    if (rows > 0) out = a.value().colwise().mean();
    const int ia = a.id();
    return a.tape()->record(std::move(out), {a}, [ia, rows](Tape<T>& t, const Matrix<T>&, const Matrix<T>& g) {
        if (rows == 0) return;
        t.grad(ia).rowwise() += g.row(0) / static_cast<T>(rows);
    });
}

template <class T>
Var<T> gather_rows(const Var<T>& table, std::span<const int> ids) {
    const Matrix<T>& tv = table.value();
    Matrix<T> out(static_cast<Eigen::Index>(ids.size()), tv.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || ids[i] >= tv.rows()) throw IndexError("gather_rows: id " + std::to_string(ids[i]) + " out of range");
        out.row(static_cast<Eigen::Index>(i)) = tv.row(ids[i]);
    }
    const int it = table.id();
    std::vector<int> idx(ids.begin(), ids.end());
    return table.tape()->record(std::move(out), {table}, [it, idx](Tape<T>& t, const Matrix<T>&, const Matrix<T>& g) {
        Matrix<T>& dt = t.grad(it);
        for (std::size_t i = 0; i < idx.size(); ++i) dt.row(idx[i]) += g.row(static_cast<Eigen::Index>(i));
    });
}

template <class T>
Var<T> l2_normalize_rows(const Var<T>& a) {
    Matrix<T> out = a.value();
    Eigen::Matrix<T, Eigen::Dynamic, 1> norms(out.rows());
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
        norms(r) = out.row(r).norm();
        if (!(norms(r) > T(0))) throw ScoreError("l2_normalize_rows: zero-norm row");
        out.row(r) /= norms(r);
    }
    const int ia = a.id();
    return a.tape()->record(std::move(out), {a}, [ia, norms](Tape<T>& t, const Matrix<T>& y, const Matrix<T>& g) {
        Matrix<T>& dx = t.grad(ia);
        for (Eigen::Index r = 0; r < y.rows(); ++r) {
            const T dot = g.row(r).dot(y.row(r));
            dx.row(r) += (g.row(r) - y.row(r) * dot) / norms(r);
        }
    });
}

template <class T>
Var<T> mean_all(const Var<T>& a) {
    const auto n = static_cast<T>(a.value().size());
    Matrix<T> out(1, 1);
    out(0, 0) = a.value().sum() / n;
    const int ia = a.id();
    return a.tape()->record(std::move(out), {a}, [ia, n](Tape<T>& t, const Matrix<T>&, const Matrix<T>& g) {
        t.grad(ia).array() += g(0, 0) / n;
    });
}

template <class T>
Var<T> mse(const Var<T>& a, const Matrix<T>& target) {
    if (a.rows() != target.rows() || a.cols() != target.cols()) throw ShapeError("mse: prediction/target shape mismatch");
    Matrix<T> diff = a.value() - target;
    const auto n = static_cast<T>(diff.size());
    Matrix<T> out(1, 1);
    out(0, 0) = diff.squaredNorm() / n;
    const int ia = a.id();
    return a.tape()->record(std::move(out), {a}, [ia, diff = std::move(diff), n](Tape<T>& t, const Matrix<T>&, const Matrix<T>& g) {
        t.grad(ia) += diff * (T(2) * g(0, 0) / n);
    });
}

template <class T>
Var<T> softmax_cross_entropy(const Var<T>& logits, std::span<const int> labels) {
    const Matrix<T>& z = logits.value();
    if (static_cast<std::size_t>(z.rows()) != labels.size()) throw ShapeError("softmax_cross_entropy: label count mismatch");
    Matrix<T> probs(z.rows(), z.cols());
    T loss = 0;
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
        const int label = labels[static_cast<std::size_t>(r)];
        if (label < 0 || label >= z.cols()) throw IndexError("softmax_cross_entropy: label out of range");
        const T mx = z.row(r).maxCoeff();
        probs.row(r) = (z.row(r).array() - mx).exp();
        const T sum = probs.row(r).sum();
        probs.row(r) /= sum;
        loss += -(z(r, label) - mx - std::log(sum));
    }
    const auto n = static_cast<T>(z.rows());
    Matrix<T> out(1, 1);
    out(0, 0) = loss / n;
    std::vector<int> lab(labels.begin(), labels.end());
    const int il = logits.id();
    return logits.tape()->record(std::move(out), {logits},
                                 [il, probs = std::move(probs), lab, n](Tape<T>& t, const Matrix<T>&, const Matrix<T>& g) {
                                     Matrix<T> d = probs;
                                     for (std::size_t r = 0; r < lab.size(); ++r) d(static_cast<Eigen::Index>(r), lab[r]) -= T(1);
                                     t.grad(il) += d * (g(0, 0) / n);
                                 });
}

template <class T>
double clip_grad_norm(const ParameterList<T>& params, double max_norm) {
    double total = 0.0;
    for (const auto& np : params) {
        if (np.param->touched) total += static_cast<double>(np.param->grad.squaredNorm());
    }
    const double norm = std::sqrt(total);
    if (max_norm > 0.0 && norm > max_norm) {
        const T factor = static_cast<T>(max_norm / (norm + 1e-6));
        for (const auto& np : params) {
            if (np.param->touched) np.param->grad *= factor;
        }
    }
    return norm;
}

#define TOUCHGEN_AG_INSTANTIATE(T)                                                              \
    template class Tape<T>;                                                                     \
    template Var<T> matmul(const Var<T>&, const Var<T>&);                                       \
    template Var<T> matmul_nt(const Var<T>&, const Var<T>&);                                    \
    template Var<T> add(const Var<T>&, const Var<T>&);                                          \
    template Var<T> sub(const Var<T>&, const Var<T>&);                                          \
    template Var<T> mul(const Var<T>&, const Var<T>&);                                          \
    template Var<T> scale(const Var<T>&, T);                                                    \
    template Var<T> add_row(const Var<T>&, const Var<T>&);                                      \
    template Var<T> mul_row(const Var<T>&, const Var<T>&);                                      \
    template Var<T> modulate(const Var<T>&, const Var<T>&, const Var<T>&);                      \
    template Var<T> silu(const Var<T>&);                                                        \
    template Var<T> gelu(const Var<T>&);                                                        \
    template Var<T> layer_norm(const Var<T>&, T);                                               \
    template Var<T> softmax_rows(const Var<T>&);                                                \
    template Var<T> concat_rows(std::span<const Var<T>>);                                       \
    template Var<T> concat_cols(std::span<const Var<T>>);                                       \
    template Var<T> slice_rows(const Var<T>&, Eigen::Index, Eigen::Index);                      \
    template Var<T> slice_cols(const Var<T>&, Eigen::Index, Eigen::Index);                      \
    template Var<T> mean_rows(const Var<T>&);                                                   \
    template Var<T> gather_rows(const Var<T>&, std::span<const int>);                           \
    template Var<T> l2_normalize_rows(const Var<T>&);                                           \
    template Var<T> mean_all(const Var<T>&);                                                    \
    template Var<T> mse(const Var<T>&, const Matrix<T>&);                                       \
    template Var<T> softmax_cross_entropy(const Var<T>&, std::span<const int>);                 \
    template double clip_grad_norm(const ParameterList<T>&, double);

TOUCHGEN_AG_INSTANTIATE(float)
TOUCHGEN_AG_INSTANTIATE(double)

#undef TOUCHGEN_AG_INSTANTIATE

}  // namespace touchgen::ag
