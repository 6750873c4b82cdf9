// Copyright (c) 2026 almlab contributors
// SPDX-License-Identifier: Apache-2.0
//
// Dense 1-D/2-D tensors with reverse-mode autodiff. Every op returns a fresh
// tensor holding its own storage; when gradients are enabled and at least one
// input lies on a gradient path, the op also records parents plus a backward
// closure. Tensor is a cheap shared handle onto the node, so parameters can be
// updated in place between forward passes.
//
// Leaves with requires_grad == false never receive gradient accumulation:
// their .grad stays identically zero no matter what loss is run. That is the
// contract freeze masks rely on.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "almlab/common.hpp"
#include "almlab/rng.hpp"

namespace alm {

using Index = std::size_t;

enum class Reduction { Mean, Sum };

template <typename T>
struct TensorNode {
    static_assert(std::is_floating_point_v<T>);

    std::vector<Index> shape;
    std::vector<T> value;
    std::vector<T> grad;  // sized lazily; empty means "all zero"
    bool requires_grad = false;
    bool on_grad_path = false;
    std::vector<std::shared_ptr<TensorNode<T>>> parents;
    std::function<void(TensorNode<T>&)> backward;

    Index numel() const { return value.size(); }

    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), T(0));
    }
};

namespace detail {

inline Index shape_numel(const std::vector<Index>& shape) {
    Index n = 1;
    for (Index d : shape) n *= d;
    return n;
}

inline std::string shape_str(const std::vector<Index>& shape) {
    std::ostringstream os;
    os << '[';
    for (Index i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ']';
    return os.str();
}

inline bool& grad_mode_flag() {
    thread_local bool enabled = true;
    return enabled;
}

}  // namespace detail

inline bool grad_enabled() { return detail::grad_mode_flag(); }

// RAII gradient switch for inference paths (generation, evaluation).
struct NoGradGuard {
    bool prev;
    NoGradGuard() : prev(detail::grad_mode_flag()) { detail::grad_mode_flag() = false; }
    ~NoGradGuard() { detail::grad_mode_flag() = prev; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

template <typename T>
class Tensor {
public:
    Tensor() = default;

    static Tensor from(std::vector<Index> shape, std::vector<T> data, bool requires_grad = false) {
        if (detail::shape_numel(shape) != data.size())
            throw ShapeError("tensor data size " + std::to_string(data.size()) +
                             " does not match shape " + detail::shape_str(shape));
        for (Index d : shape)
            if (d == 0) throw ShapeError("tensor extents must be positive, got " + detail::shape_str(shape));
        Tensor t;
        t.node_ = std::make_shared<TensorNode<T>>();
        t.node_->shape = std::move(shape);
        t.node_->value = std::move(data);
        t.node_->requires_grad = requires_grad;
        t.node_->on_grad_path = requires_grad;
        return t;
    }

    static Tensor zeros(std::vector<Index> shape, bool requires_grad = false) {
        std::vector<T> data(detail::shape_numel(shape), T(0));
        return from(std::move(shape), std::move(data), requires_grad);
    }

    static Tensor full(std::vector<Index> shape, T v, bool requires_grad = false) {
        std::vector<T> data(detail::shape_numel(shape), v);
        return from(std::move(shape), std::move(data), requires_grad);
    }

    static Tensor scalar(T v, bool requires_grad = false) {
        return from({1}, {v}, requires_grad);
    }

    static Tensor randn(std::vector<Index> shape, Rng& rng, T stddev, bool requires_grad = false) {
        std::vector<T> data(detail::shape_numel(shape));
        for (auto& v : data) v = static_cast<T>(rng.normal()) * stddev;
        return from(std::move(shape), std::move(data), requires_grad);
    }

    bool defined() const { return node_ != nullptr; }

    const std::vector<Index>& shape() const { return node_->shape; }
    Index numel() const { return node_->numel(); }
    Index ndim() const { return node_->shape.size(); }
    Index rows() const {
        if (ndim() != 2) throw ShapeError("rows() requires a 2-D tensor, got " + detail::shape_str(shape()));
        return node_->shape[0];
    }
    Index cols() const {
        if (ndim() != 2) throw ShapeError("cols() requires a 2-D tensor, got " + detail::shape_str(shape()));
        return node_->shape[1];
    }

    std::vector<T>& data() { return node_->value; }
    const std::vector<T>& data() const { return node_->value; }

    T at(Index r, Index c) const { return node_->value[r * cols() + c]; }

    T item() const {
        if (numel() != 1) throw ShapeError("item() requires a scalar tensor");
        return node_->value[0];
    }

    bool requires_grad() const { return node_->requires_grad; }

    void set_requires_grad(bool rg) {
        node_->requires_grad = rg;
        node_->on_grad_path = rg || node_->backward != nullptr;
    }

    // Gradient buffer; materializes zeros on first access.
    std::vector<T>& grad() {
        node_->ensure_grad();
        return node_->grad;
    }
    const std::vector<T>& grad() const {
        node_->ensure_grad();
        return node_->grad;
    }

    void zero_grad() { node_->grad.clear(); }

    bool all_finite() const {
        for (T v : node_->value)
            if (!is_finite_value(v)) return false;
        return true;
    }

    void check_finite(const std::string& context) const {
        if (!all_finite()) throw NumericError("non-finite values in " + context);
    }

    // Reverse pass from a scalar root. Seeds d(root)/d(root) = 1 and walks the
    // recorded graph in reverse topological order.
    void backward() const {
        if (numel() != 1) throw UsageError("backward() requires a scalar loss");
        if (!node_->on_grad_path)
            throw UsageError("backward() called on a tensor with no gradient path");

        std::vector<TensorNode<T>*> order;
        std::unordered_set<TensorNode<T>*> seen;
        // Iterative post-order DFS over grad-path ancestors.
        std::vector<std::pair<TensorNode<T>*, Index>> stack;
        stack.emplace_back(node_.get(), 0);
        seen.insert(node_.get());
        while (!stack.empty()) {
            auto& [n, next_parent] = stack.back();
            bool descended = false;
            while (next_parent < n->parents.size()) {
                TensorNode<T>* p = n->parents[next_parent++].get();
                if (p->on_grad_path && seen.insert(p).second) {
                    stack.emplace_back(p, 0);
                    descended = true;
                    break;
                }
            }
            if (!descended && next_parent >= n->parents.size()) {
                order.push_back(n);
                stack.pop_back();
            }
        }

        node_->ensure_grad();
        node_->grad[0] = T(1);
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            TensorNode<T>* n = *it;
            if (n->backward && !n->grad.empty()) n->backward(*n);
        }
    }

    std::shared_ptr<TensorNode<T>> node() const { return node_; }

private:
    std::shared_ptr<TensorNode<T>> node_;
};

namespace detail {

// Records graph edges on `out` when grads are on and some input needs them.
template <typename T>
void attach(Tensor<T>& out, std::vector<std::shared_ptr<TensorNode<T>>> parents,
            std::function<void(TensorNode<T>&)> backward) {
    if (!grad_mode_flag()) return;
    bool any = false;
    for (const auto& p : parents)
        if (p->on_grad_path) { any = true; break; }
    if (!any) return;
    auto n = out.node();
    n->parents = std::move(parents);
    n->backward = std::move(backward);
    n->on_grad_path = true;
}

template <typename T>
void accumulate(TensorNode<T>& dst, const std::vector<T>& contrib) {
    dst.ensure_grad();
    for (Index i = 0; i < contrib.size(); ++i) dst.grad[i] += contrib[i];
}

}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape() != b.shape())
        throw ShapeError("add: shape mismatch " + detail::shape_str(a.shape()) + " vs " +
                         detail::shape_str(b.shape()));
    std::vector<T> out(a.numel());
    const auto& av = a.data();
    const auto& bv = b.data();
    for (Index i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
    auto y = Tensor<T>::from(a.shape(), std::move(out));
    detail::attach<T>(y, {a.node(), b.node()}, [](TensorNode<T>& n) {
        for (int k = 0; k < 2; ++k) {
            auto& p = *n.parents[k];
            if (!p.on_grad_path) continue;
            p.ensure_grad();
            for (Index i = 0; i < n.grad.size(); ++i) p.grad[i] += n.grad[i];
        }
    });
    return y;
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape() != b.shape()) throw ShapeError("sub: shape mismatch");
    std::vector<T> out(a.numel());
    const auto& av = a.data();
    const auto& bv = b.data();
    for (Index i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
    auto y = Tensor<T>::from(a.shape(), std::move(out));
    detail::attach<T>(y, {a.node(), b.node()}, [](TensorNode<T>& n) {
        auto& pa = *n.parents[0];
        auto& pb = *n.parents[1];
        if (pa.on_grad_path) {
            pa.ensure_grad();
            for (Index i = 0; i < n.grad.size(); ++i) pa.grad[i] += n.grad[i];
        }
        if (pb.on_grad_path) {
            pb.ensure_grad();
            for (Index i = 0; i < n.grad.size(); ++i) pb.grad[i] -= n.grad[i];
        }
    });
    return y;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape() != b.shape()) throw ShapeError("mul: shape mismatch");
    std::vector<T> out(a.numel());
    const auto& av = a.data();
    const auto& bv = b.data();
    for (Index i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
    auto y = Tensor<T>::from(a.shape(), std::move(out));
    detail::attach<T>(y, {a.node(), b.node()}, [](TensorNode<T>& n) {
        auto& pa = *n.parents[0];
        auto& pb = *n.parents[1];
        if (pa.on_grad_path) {
            pa.ensure_grad();
            for (Index i = 0; i < n.grad.size(); ++i) pa.grad[i] += n.grad[i] * pb.value[i];
        }
        if (pb.on_grad_path) {
            pb.ensure_grad();
            for (Index i = 0; i < n.grad.size(); ++i) pb.grad[i] += n.grad[i] * pa.value[i];
        }
    });
    return y;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T c) {
    std::vector<T> out(a.numel());
    const auto& av = a.data();
    for (Index i = 0; i < out.size(); ++i) out[i] = av[i] * c;
    auto y = Tensor<T>::from(a.shape(), std::move(out));
    detail::attach<T>(y, {a.node()}, [c](TensorNode<T>& n) {
        auto& p = *n.parents[0];
        if (!p.on_grad_path) return;
        p.ensure_grad();
        for (Index i = 0; i < n.grad.size(); ++i) p.grad[i] += n.grad[i] * c;
    });
    return y;
}

// mat [m,n] + bias [n] broadcast over rows
template <typename T>
Tensor<T> add_bias(const Tensor<T>& mat, const Tensor<T>& bias) {
    Index m = mat.rows(), n = mat.cols();
    if (bias.ndim() != 1 || bias.shape()[0] != n)
        throw ShapeError("add_bias: bias must be [cols]");
    std::vector<T> out(mat.numel());
    const auto& mv = mat.data();
    const auto& bv = bias.data();
    for (Index r = 0; r < m; ++r)
        for (Index c = 0; c < n; ++c) out[r * n + c] = mv[r * n + c] + bv[c];
    auto y = Tensor<T>::from(mat.shape(), std::move(out));
    detail::attach<T>(y, {mat.node(), bias.node()}, [m, n](TensorNode<T>& nd) {
        auto& pm = *nd.parents[0];
        auto& pb = *nd.parents[1];
        if (pm.on_grad_path) {
            pm.ensure_grad();
            for (Index i = 0; i < nd.grad.size(); ++i) pm.grad[i] += nd.grad[i];
        }
        if (pb.on_grad_path) {
            pb.ensure_grad();
            for (Index r = 0; r < m; ++r)
                for (Index c = 0; c < n; ++c) pb.grad[c] += nd.grad[r * n + c];
        }
    });
    return y;
}

// ---------------------------------------------------------------------------
// matmul
// ---------------------------------------------------------------------------

namespace detail {

// c[m,n] += a[m,k] * b[k,n]
template <typename T>
void mm_acc(const T* a, const T* b, T* c, Index m, Index k, Index n) {
    for (Index i = 0; i < m; ++i) {
        const T* arow = a + i * k;
        T* crow = c + i * n;
        for (Index p = 0; p < k; ++p) {
            T av = arow[p];
            if (av == T(0)) continue;
            const T* brow = b + p * n;
            for (Index j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// c[m,n] += a[m,k] * b[n,k]^T
template <typename T>
void mm_nt_acc(const T* a, const T* b, T* c, Index m, Index k, Index n) {
    for (Index i = 0; i < m; ++i) {
        const T* arow = a + i * k;
        T* crow = c + i * n;
        for (Index j = 0; j < n; ++j) {
            const T* brow = b + j * k;
            T s = 0;
            for (Index p = 0; p < k; ++p) s += arow[p] * brow[p];
            crow[j] += s;
        }
    }
}

// c[k,n] += a[m,k]^T * b[m,n]
template <typename T>
void mm_tn_acc(const T* a, const T* b, T* c, Index m, Index k, Index n) {
    for (Index i = 0; i < m; ++i) {
        const T* arow = a + i * k;
        const T* brow = b + i * n;
        for (Index p = 0; p < k; ++p) {
            T av = arow[p];
            if (av == T(0)) continue;
            T* crow = c + p * n;
            for (Index j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

}  // namespace detail

// [m,k] x [k,n] -> [m,n]
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    Index m = a.rows(), k = a.cols();
    if (b.rows() != k)
        throw ShapeError("matmul: inner dims " + detail::shape_str(a.shape()) + " x " +
                         detail::shape_str(b.shape()));
    Index n = b.cols();
    std::vector<T> out(m * n, T(0));
    detail::mm_acc(a.data().data(), b.data().data(), out.data(), m, k, n);
    auto y = Tensor<T>::from({m, n}, std::move(out));
    detail::attach<T>(y, {a.node(), b.node()}, [m, k, n](TensorNode<T>& nd) {
        auto& pa = *nd.parents[0];
        auto& pb = *nd.parents[1];
        if (pa.on_grad_path) {
            pa.ensure_grad();
            // dA = dY * B^T
            detail::mm_nt_acc(nd.grad.data(), pb.value.data(), pa.grad.data(), m, n, k);
        }
        if (pb.on_grad_path) {
            pb.ensure_grad();
            // dB = A^T * dY
            detail::mm_tn_acc(pa.value.data(), nd.grad.data(), pb.grad.data(), m, k, n);
        }
    });
    return y;
}

// a [m,k] x b[n,k]^T -> [m,n]
template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
    Index m = a.rows(), k = a.cols();
    if (b.cols() != k) throw ShapeError("matmul_nt: inner dims mismatch");
    Index n = b.rows();
    std::vector<T> out(m * n, T(0));
    detail::mm_nt_acc(a.data().data(), b.data().data(), out.data(), m, k, n);
    auto y = Tensor<T>::from({m, n}, std::move(out));
    detail::attach<T>(y, {a.node(), b.node()}, [m, k, n](TensorNode<T>& nd) {
        auto& pa = *nd.parents[0];
        auto& pb = *nd.parents[1];
        if (pa.on_grad_path) {
            pa.ensure_grad();
            // dA = dY * B
            detail::mm_acc(nd.grad.data(), pb.value.data(), pa.grad.data(), m, n, k);
        }
        if (pb.on_grad_path) {
            pb.ensure_grad();
            // dB = dY^T * A
            detail::mm_tn_acc(nd.grad.data(), pa.value.data(), pb.grad.data(), m, n, k);
        }
    });
    return y;
}

// ---------------------------------------------------------------------------
// nonlinearities and norms
// ---------------------------------------------------------------------------

// Exact Gaussian-CDF GELU: x * Phi(x).
template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
    constexpr double inv_sqrt2 = 0.7071067811865475244;
    constexpr double inv_sqrt2pi = 0.3989422804014326779;
    std::vector<T> out(x.numel());
    const auto& xv = x.data();
    for (Index i = 0; i < out.size(); ++i) {
        double v = static_cast<double>(xv[i]);
        double phi = 0.5 * std::erfc(-v * inv_sqrt2);
        out[i] = static_cast<T>(v * phi);
    }
    auto y = Tensor<T>::from(x.shape(), std::move(out));
    detail::attach<T>(y, {x.node()}, [](TensorNode<T>& n) {
        auto& p = *n.parents[0];
        if (!p.on_grad_path) return;
        p.ensure_grad();
        for (Index i = 0; i < n.grad.size(); ++i) {
            double v = static_cast<double>(p.value[i]);
            double phi = 0.5 * std::erfc(-v * inv_sqrt2);
            double pdf = inv_sqrt2pi * std::exp(-0.5 * v * v);
            p.grad[i] += n.grad[i] * static_cast<T>(phi + v * pdf);
        }
    });
    return y;
}

// Row-wise normalization followed by the (gamma, beta) affine. Accepts [d]
// (treated as a single row) or [rows, d].
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     T eps = T(1e-5)) {
    if (eps <= T(0)) throw UsageError("layer_norm: eps must be positive");
    Index d = x.ndim() == 1 ? x.shape()[0] : x.cols();
    Index rows = x.ndim() == 1 ? 1 : x.rows();
    if (d == 0) throw ShapeError("layer_norm: zero-length last axis");
    if (gamma.numel() != d || beta.numel() != d)
        throw ShapeError("layer_norm: gamma/beta must have length " + std::to_string(d));

    std::vector<T> out(x.numel());
    std::vector<T> inv_std(rows), mean(rows);
    const auto& xv = x.data();
    const auto& gv = gamma.data();
    const auto& bv = beta.data();
    for (Index r = 0; r < rows; ++r) {
        const T* row = xv.data() + r * d;
        T mu = std::accumulate(row, row + d, T(0)) / static_cast<T>(d);
        T var = 0;
        for (Index c = 0; c < d; ++c) {
            T diff = row[c] - mu;
            var += diff * diff;
        }
        var /= static_cast<T>(d);
        T inv = T(1) / std::sqrt(var + eps);
        mean[r] = mu;
        inv_std[r] = inv;
        for (Index c = 0; c < d; ++c) out[r * d + c] = (row[c] - mu) * inv * gv[c] + bv[c];
    }
    auto y = Tensor<T>::from(x.shape(), std::move(out));
    detail::attach<T>(y, {x.node(), gamma.node(), beta.node()},
                      [d, rows, mean, inv_std](TensorNode<T>& n) {
        auto& px = *n.parents[0];
        auto& pg = *n.parents[1];
        auto& pb = *n.parents[2];
        if (px.on_grad_path) px.ensure_grad();
        if (pg.on_grad_path) pg.ensure_grad();
        if (pb.on_grad_path) pb.ensure_grad();
        T dd = static_cast<T>(d);
        for (Index r = 0; r < rows; ++r) {
            const T* xrow = px.value.data() + r * d;
            const T* grow = n.grad.data() + r * d;
            T mu = mean[r], inv = inv_std[r];
            if (pg.on_grad_path || pb.on_grad_path) {
                for (Index c = 0; c < d; ++c) {
                    T xhat = (xrow[c] - mu) * inv;
                    if (pg.on_grad_path) pg.grad[c] += grow[c] * xhat;
                    if (pb.on_grad_path) pb.grad[c] += grow[c];
                }
            }
            if (!px.on_grad_path) continue;
            // dxhat = dy * gamma; dx via the standard mean/variance chain
            T sum_dxhat = 0, sum_dxhat_xhat = 0;
            for (Index c = 0; c < d; ++c) {
                T xhat = (xrow[c] - mu) * inv;
                T dxhat = grow[c] * pg.value[c];
                sum_dxhat += dxhat;
                sum_dxhat_xhat += dxhat * xhat;
            }
            T* gxrow = px.grad.data() + r * d;
            for (Index c = 0; c < d; ++c) {
                T xhat = (xrow[c] - mu) * inv;
                T dxhat = grow[c] * pg.value[c];
                gxrow[c] += inv * (dxhat - sum_dxhat / dd - xhat * sum_dxhat_xhat / dd);
            }
        }
    });
    return y;
}

template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& x) {
    Index rows = x.rows(), cols = x.cols();
    std::vector<T> out(x.numel());
    const auto& xv = x.data();
    for (Index r = 0; r < rows; ++r) {
        const T* row = xv.data() + r * cols;
        T mx = *std::max_element(row, row + cols);
        T sum = 0;
        for (Index c = 0; c < cols; ++c) {
            T e = std::exp(row[c] - mx);
            out[r * cols + c] = e;
            sum += e;
        }
        T inv = T(1) / sum;
        for (Index c = 0; c < cols; ++c) out[r * cols + c] *= inv;
    }
    auto y = Tensor<T>::from(x.shape(), std::move(out));
    detail::attach<T>(y, {x.node()}, [rows, cols](TensorNode<T>& n) {
        auto& p = *n.parents[0];
        if (!p.on_grad_path) return;
        p.ensure_grad();
        for (Index r = 0; r < rows; ++r) {
            const T* yrow = n.value.data() + r * cols;
            const T* grow = n.grad.data() + r * cols;
            T dot = 0;
            for (Index c = 0; c < cols; ++c) dot += yrow[c] * grow[c];
            T* prow = p.grad.data() + r * cols;
            for (Index c = 0; c < cols; ++c) prow[c] += yrow[c] * (grow[c] - dot);
        }
    });
    return y;
}

// ---------------------------------------------------------------------------
// gather / layout ops
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> embedding(const Tensor<T>& table, const std::vector<int>& ids) {
    Index vocab = table.rows(), d = table.cols();
    if (ids.empty()) throw ShapeError("embedding: empty id list");
    std::vector<T> out(ids.size() * d);
    const auto& tv = table.data();
    for (Index i = 0; i < ids.size(); ++i) {
        int id = ids[i];
        if (id < 0 || static_cast<Index>(id) >= vocab)
            throw DataError("embedding: id " + std::to_string(id) + " out of range [0," +
                            std::to_string(vocab) + ")");
        std::copy_n(tv.data() + static_cast<Index>(id) * d, d, out.data() + i * d);
    }
    auto y = Tensor<T>::from({ids.size(), d}, std::move(out));
    detail::attach<T>(y, {table.node()}, [ids, d](TensorNode<T>& n) {
        auto& p = *n.parents[0];
        if (!p.on_grad_path) return;
        p.ensure_grad();
        for (Index i = 0; i < ids.size(); ++i) {
            T* dst = p.grad.data() + static_cast<Index>(ids[i]) * d;
            const T* src = n.grad.data() + i * d;
            for (Index c = 0; c < d; ++c) dst[c] += src[c];
        }
    });
    return y;
}

template <typename T>
Tensor<T> concat_rows(const std::vector<Tensor<T>>& parts) {
    if (parts.empty()) throw ShapeError("concat_rows: no inputs");
    Index cols = parts[0].cols();
    Index total = 0;
    for (const auto& p : parts) {
        if (p.cols() != cols) throw ShapeError("concat_rows: column mismatch");
        total += p.rows();
    }
    std::vector<T> out;
    out.reserve(total * cols);
    std::vector<std::shared_ptr<TensorNode<T>>> nodes;
    std::vector<Index> row_counts;
    for (const auto& p : parts) {
        out.insert(out.end(), p.data().begin(), p.data().end());
        nodes.push_back(p.node());
        row_counts.push_back(p.rows());
    }
    auto y = Tensor<T>::from({total, cols}, std::move(out));
    detail::attach<T>(y, std::move(nodes), [row_counts, cols](TensorNode<T>& n) {
        Index row = 0;
        for (Index k = 0; k < n.parents.size(); ++k) {
            auto& p = *n.parents[k];
            Index count = row_counts[k] * cols;
            if (p.on_grad_path) {
                p.ensure_grad();
                const T* src = n.grad.data() + row * cols;
                for (Index i = 0; i < count; ++i) p.grad[i] += src[i];
            }
            row += row_counts[k];
        }
    });
    return y;
}

template <typename T>
Tensor<T> slice_rows(const Tensor<T>& x, Index start, Index len) {
    Index rows = x.rows(), cols = x.cols();
    if (start + len > rows) throw ShapeError("slice_rows: out of range");
    std::vector<T> out(x.data().begin() + start * cols, x.data().begin() + (start + len) * cols);
    auto y = Tensor<T>::from({len, cols}, std::move(out));
    detail::attach<T>(y, {x.node()}, [start, len, cols](TensorNode<T>& n) {
        auto& p = *n.parents[0];
        if (!p.on_grad_path) return;
        p.ensure_grad();
        T* dst = p.grad.data() + start * cols;
        for (Index i = 0; i < len * cols; ++i) dst[i] += n.grad[i];
    });
    return y;
}

template <typename T>
Tensor<T> slice_cols(const Tensor<T>& x, Index start, Index len) {
    Index rows = x.rows(), cols = x.cols();
    if (start + len > cols) throw ShapeError("slice_cols: out of range");
    std::vector<T> out(rows * len);
    const auto& xv = x.data();
    for (Index r = 0; r < rows; ++r)
        std::copy_n(xv.data() + r * cols + start, len, out.data() + r * len);
    auto y = Tensor<T>::from({rows, len}, std::move(out));
    detail::attach<T>(y, {x.node()}, [start, len, rows, cols](TensorNode<T>& n) {
        auto& p = *n.parents[0];
        if (!p.on_grad_path) return;
        p.ensure_grad();
        for (Index r = 0; r < rows; ++r) {
            T* dst = p.grad.data() + r * cols + start;
            const T* src = n.grad.data() + r * len;
            for (Index c = 0; c < len; ++c) dst[c] += src[c];
        }
    });
    return y;
}

template <typename T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no inputs");
    Index rows = parts[0].rows();
    Index total = 0;
    for (const auto& p : parts) {
        if (p.rows() != rows) throw ShapeError("concat_cols: row mismatch");
        total += p.cols();
    }
    std::vector<T> out(rows * total);
    std::vector<std::shared_ptr<TensorNode<T>>> nodes;
    std::vector<Index> widths;
    Index off = 0;
    for (const auto& p : parts) {
        Index w = p.cols();
        for (Index r = 0; r < rows; ++r)
            std::copy_n(p.data().data() + r * w, w, out.data() + r * total + off);
        off += w;
        nodes.push_back(p.node());
        widths.push_back(w);
    }
    auto y = Tensor<T>::from({rows, total}, std::move(out));
    detail::attach<T>(y, std::move(nodes), [widths, rows, total](TensorNode<T>& n) {
        Index off2 = 0;
        for (Index k = 0; k < n.parents.size(); ++k) {
            auto& p = *n.parents[k];
            Index w = widths[k];
            if (p.on_grad_path) {
                p.ensure_grad();
                for (Index r = 0; r < rows; ++r) {
                    const T* src = n.grad.data() + r * total + off2;
                    T* dst = p.grad.data() + r * w;
                    for (Index c = 0; c < w; ++c) dst[c] += src[c];
                }
            }
            off2 += w;
        }
    });
    return y;
}

// ---------------------------------------------------------------------------
// conv / pooling / stacking
// ---------------------------------------------------------------------------

// 1-D convolution over rows (time). x: [T_in, C_in], w: [kernel*C_in, C_out]
// with taps laid out contiguously, b: [C_out]. Output length is
// floor((T_in + 2*pad - kernel)/stride) + 1.
template <typename T>
Tensor<T> conv1d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, Index kernel,
                 Index stride, Index pad) {
    Index t_in = x.rows(), c_in = x.cols();
    if (w.rows() != kernel * c_in)
        throw ShapeError("conv1d: weight rows must be kernel*C_in");
    Index c_out = w.cols();
    if (b.numel() != c_out) throw ShapeError("conv1d: bias length mismatch");
    if (t_in + 2 * pad < kernel) throw ShapeError("conv1d: input shorter than kernel");
    Index t_out = (t_in + 2 * pad - kernel) / stride + 1;

    std::vector<T> out(t_out * c_out);
    const auto& xv = x.data();
    const auto& wv = w.data();
    const auto& bv = b.data();
    for (Index to = 0; to < t_out; ++to) {
        T* orow = out.data() + to * c_out;
        std::copy_n(bv.data(), c_out, orow);
        for (Index tap = 0; tap < kernel; ++tap) {
            std::int64_t ti = static_cast<std::int64_t>(to * stride + tap) - static_cast<std::int64_t>(pad);
            if (ti < 0 || ti >= static_cast<std::int64_t>(t_in)) continue;
            const T* xrow = xv.data() + static_cast<Index>(ti) * c_in;
            const T* wblock = wv.data() + tap * c_in * c_out;
            for (Index ci = 0; ci < c_in; ++ci) {
                T xval = xrow[ci];
                if (xval == T(0)) continue;
                const T* wrow = wblock + ci * c_out;
                for (Index co = 0; co < c_out; ++co) orow[co] += xval * wrow[co];
            }
        }
    }
    auto y = Tensor<T>::from({t_out, c_out}, std::move(out));
    detail::attach<T>(y, {x.node(), w.node(), b.node()},
                      [t_in, c_in, c_out, kernel, stride, pad, t_out](TensorNode<T>& n) {
        auto& px = *n.parents[0];
        auto& pw = *n.parents[1];
        auto& pb = *n.parents[2];
        if (px.on_grad_path) px.ensure_grad();
        if (pw.on_grad_path) pw.ensure_grad();
        if (pb.on_grad_path) pb.ensure_grad();
        for (Index to = 0; to < t_out; ++to) {
            const T* grow = n.grad.data() + to * c_out;
            if (pb.on_grad_path)
                for (Index co = 0; co < c_out; ++co) pb.grad[co] += grow[co];
            for (Index tap = 0; tap < kernel; ++tap) {
                std::int64_t ti =
                    static_cast<std::int64_t>(to * stride + tap) - static_cast<std::int64_t>(pad);
                if (ti < 0 || ti >= static_cast<std::int64_t>(t_in)) continue;
                const T* xrow = px.value.data() + static_cast<Index>(ti) * c_in;
                for (Index ci = 0; ci < c_in; ++ci) {
                    Index wbase = (tap * c_in + ci) * c_out;
                    if (pw.on_grad_path) {
                        T xval = xrow[ci];
                        for (Index co = 0; co < c_out; ++co)
                            pw.grad[wbase + co] += xval * grow[co];
                    }
                    if (px.on_grad_path) {
                        T s = 0;
                        for (Index co = 0; co < c_out; ++co)
                            s += pw.value[wbase + co] * grow[co];
                        px.grad[static_cast<Index>(ti) * c_in + ci] += s;
                    }
                }
            }
        }
    });
    return y;
}

// Mean over groups of k consecutive rows; a trailing partial group averages
// only its real members.
template <typename T>
Tensor<T> mean_pool_rows(const Tensor<T>& x, Index k) {
    if (k < 1) throw UsageError("mean_pool_rows: k must be >= 1");
    Index rows = x.rows(), cols = x.cols();
    if (rows == 0) throw ShapeError("mean_pool_rows: empty input");
    Index out_rows = (rows + k - 1) / k;
    std::vector<T> out(out_rows * cols, T(0));
    const auto& xv = x.data();
    for (Index g = 0; g < out_rows; ++g) {
        Index lo = g * k, hi = std::min(rows, lo + k);
        T inv = T(1) / static_cast<T>(hi - lo);
        for (Index r = lo; r < hi; ++r)
            for (Index c = 0; c < cols; ++c) out[g * cols + c] += xv[r * cols + c] * inv;
    }
    auto y = Tensor<T>::from({out_rows, cols}, std::move(out));
    detail::attach<T>(y, {x.node()}, [rows, cols, k, out_rows](TensorNode<T>& n) {
        auto& p = *n.parents[0];
        if (!p.on_grad_path) return;
        p.ensure_grad();
        for (Index g = 0; g < out_rows; ++g) {
            Index lo = g * k, hi = std::min(rows, lo + k);
            T inv = T(1) / static_cast<T>(hi - lo);
            for (Index r = lo; r < hi; ++r)
                for (Index c = 0; c < cols; ++c)
                    p.grad[r * cols + c] += n.grad[g * cols + c] * inv;
        }
    });
    return y;
}

// Concatenates k consecutive rows along the feature axis; the trailing group
// is zero-padded to k rows.
template <typename T>
Tensor<T> stack_rows(const Tensor<T>& x, Index k) {
    if (k < 1) throw UsageError("stack_rows: k must be >= 1");
    Index rows = x.rows(), cols = x.cols();
    if (rows == 0) throw ShapeError("stack_rows: empty input");
    Index out_rows = (rows + k - 1) / k;
    std::vector<T> out(out_rows * k * cols, T(0));
    const auto& xv = x.data();
    for (Index r = 0; r < rows; ++r) {
        Index g = r / k, slot = r % k;
        std::copy_n(xv.data() + r * cols, cols, out.data() + (g * k + slot) * cols);
    }
    auto y = Tensor<T>::from({out_rows, k * cols}, std::move(out));
    detail::attach<T>(y, {x.node()}, [rows, cols, k](TensorNode<T>& n) {
        auto& p = *n.parents[0];
        if (!p.on_grad_path) return;
        p.ensure_grad();
        for (Index r = 0; r < rows; ++r) {
            Index g = r / k, slot = r % k;
            const T* src = n.grad.data() + (g * k + slot) * cols;
            T* dst = p.grad.data() + r * cols;
            for (Index c = 0; c < cols; ++c) dst[c] += src[c];
        }
    });
    return y;
}

// ---------------------------------------------------------------------------
// dropout / reductions / losses
// ---------------------------------------------------------------------------

// Inverted dropout with a mask derived purely from `seed`.
template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double p, std::uint64_t seed) {
    if (p < 0.0 || p >= 1.0) throw UsageError("dropout: p must be in [0,1)");
    if (p == 0.0) return x;
    Rng rng(seed);
    std::vector<T> mask(x.numel());
    T keep_scale = static_cast<T>(1.0 / (1.0 - p));
    for (auto& m : mask) m = (rng.uniform() >= p) ? keep_scale : T(0);
    std::vector<T> out(x.numel());
    const auto& xv = x.data();
    for (Index i = 0; i < out.size(); ++i) out[i] = xv[i] * mask[i];
    auto y = Tensor<T>::from(x.shape(), std::move(out));
    detail::attach<T>(y, {x.node()}, [mask = std::move(mask)](TensorNode<T>& n) {
        auto& p2 = *n.parents[0];
        if (!p2.on_grad_path) return;
        p2.ensure_grad();
        for (Index i = 0; i < n.grad.size(); ++i) p2.grad[i] += n.grad[i] * mask[i];
    });
    return y;
}

template <typename T>
Tensor<T> sum_all(const Tensor<T>& x) {
    T s = std::accumulate(x.data().begin(), x.data().end(), T(0));
    auto y = Tensor<T>::scalar(s);
    detail::attach<T>(y, {x.node()}, [](TensorNode<T>& n) {
        auto& p = *n.parents[0];
        if (!p.on_grad_path) return;
        p.ensure_grad();
        for (auto& g : p.grad) g += n.grad[0];
    });
    return y;
}

// Elementwise mean of same-shape tensors.
template <typename T>
Tensor<T> mean_of(const std::vector<Tensor<T>>& parts) {
    if (parts.empty()) throw ShapeError("mean_of: no inputs");
    Tensor<T> acc = parts[0];
    for (Index i = 1; i < parts.size(); ++i) acc = add(acc, parts[i]);
    return scale(acc, T(1) / static_cast<T>(parts.size()));
}

// Masked token-level negative log-likelihood over logits [T, V]. Uses a
// stable log-sum-exp; masked positions contribute nothing.
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, const std::vector<int>& targets,
                        const std::vector<std::uint8_t>& mask,
                        Reduction reduction = Reduction::Mean) {
    Index t_len = logits.rows(), vocab = logits.cols();
    if (targets.size() != t_len || mask.size() != t_len)
        throw ShapeError("cross_entropy: targets/mask must match logits rows");
    Index count = 0;
    for (Index t = 0; t < t_len; ++t) {
        if (!mask[t]) continue;
        ++count;
        if (targets[t] < 0 || static_cast<Index>(targets[t]) >= vocab)
            throw DataError("cross_entropy: target out of range at position " + std::to_string(t));
    }
    if (count == 0) throw DataError("cross_entropy: all positions masked");

    const auto& lv = logits.data();
    double total = 0.0;
    std::vector<T> lse(t_len, T(0));  // saved for backward
    for (Index t = 0; t < t_len; ++t) {
        if (!mask[t]) continue;
        const T* row = lv.data() + t * vocab;
        T mx = *std::max_element(row, row + vocab);
        double s = 0.0;
        for (Index v = 0; v < vocab; ++v) s += std::exp(static_cast<double>(row[v] - mx));
        double l = static_cast<double>(mx) + std::log(s);
        lse[t] = static_cast<T>(l);
        total += l - static_cast<double>(row[static_cast<Index>(targets[t])]);
    }
    T norm = reduction == Reduction::Mean ? T(1) / static_cast<T>(count) : T(1);
    auto y = Tensor<T>::scalar(static_cast<T>(total) * norm);
    detail::attach<T>(y, {logits.node()},
                      [targets, mask, lse = std::move(lse), norm, vocab, t_len](TensorNode<T>& n) {
        auto& p = *n.parents[0];
        if (!p.on_grad_path) return;
        p.ensure_grad();
        T g = n.grad[0] * norm;
        for (Index t = 0; t < t_len; ++t) {
            if (!mask[t]) continue;
            const T* row = p.value.data() + t * vocab;
            T* grow = p.grad.data() + t * vocab;
            for (Index v = 0; v < vocab; ++v)
                grow[v] += g * std::exp(row[v] - lse[t]);
            grow[static_cast<Index>(targets[t])] -= g;
        }
    });
    return y;
}

// Constant additive attention mask: 0 where allowed, a large negative value
// where forbidden. `valid` (optional) marks key positions that may be
// attended at all.
template <typename T>
Tensor<T> attention_mask(Index t_len, bool causal, const std::vector<std::uint8_t>* valid) {
    constexpr T kNegInf = T(-1e30);
    std::vector<T> m(t_len * t_len, T(0));
    for (Index q = 0; q < t_len; ++q)
        for (Index k = 0; k < t_len; ++k) {
            bool ok = (!causal || k <= q) && (!valid || (*valid)[k]);
            if (!ok) m[q * t_len + k] = kNegInf;
        }
    return Tensor<T>::from({t_len, t_len}, std::move(m));
}

}  // namespace alm
