// Copyright (c) 2026 almlab contributors
// SPDX-License-Identifier: Apache-2.0
//
// Shared building blocks for the encoder and the decoder LM: linear layers
// with optional low-rank adapters, multi-head attention, and the pre-norm
// transformer block.

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "almlab/rng.hpp"
#include "almlab/tensor.hpp"

namespace alm {

inline constexpr double kInitStd = 0.02;
inline constexpr double kLnEps = 1e-5;

// Per-forward state. Dropout masks derive from (seed, running counter), so a
// forward pass is a pure function of (inputs, parameters, seed).
struct ForwardCtx {
    bool training = false;
    std::uint64_t dropout_seed = 0;
    std::uint64_t dropout_counter = 0;

    std::uint64_t next_dropout_seed() { return mix_seed(dropout_seed, dropout_counter++); }
};

template <typename T>
struct LoraAdapter {
    Tensor<T> a;  // [d_in, rank]
    Tensor<T> b;  // [rank, d_out]
    double scaling = 1.0;
    double dropout_p = 0.0;
};

template <typename T>
struct LinearParams {
    Tensor<T> w;  // [d_in, d_out]
    Tensor<T> b;  // [d_out]
    std::optional<LoraAdapter<T>> lora;

    static LinearParams init(Index d_in, Index d_out, Rng& rng) {
        LinearParams p;
        p.w = Tensor<T>::randn({d_in, d_out}, rng, static_cast<T>(kInitStd), true);
        p.b = Tensor<T>::zeros({d_out}, true);
        return p;
    }

    template <typename F>
    void visit_params(const std::string& prefix, F&& fn) {
        fn(prefix + ".weight", w);
        fn(prefix + ".bias", b);
        if (lora) {
            fn(prefix + ".lora_a", lora->a);
            fn(prefix + ".lora_b", lora->b);
        }
    }
};

// y = x W + b, plus scaling * dropout(x) A B when an adapter is attached.
template <typename T>
Tensor<T> apply_linear(const LinearParams<T>& lin, const Tensor<T>& x, ForwardCtx& ctx) {
    Tensor<T> y = add_bias(matmul(x, lin.w), lin.b);
    if (lin.lora) {
        Tensor<T> xin = x;
        if (ctx.training && lin.lora->dropout_p > 0.0)
            xin = dropout(x, lin.lora->dropout_p, ctx.next_dropout_seed());
        Tensor<T> delta = matmul(matmul(xin, lin.lora->a), lin.lora->b);
        y = add(y, scale(delta, static_cast<T>(lin.lora->scaling)));
    }
    return y;
}

template <typename T>
struct AttentionParams {
    LinearParams<T> q, k, v, o;

    static AttentionParams init(Index d_model, Rng& rng) {
        AttentionParams p;
        p.q = LinearParams<T>::init(d_model, d_model, rng);
        p.k = LinearParams<T>::init(d_model, d_model, rng);
        p.v = LinearParams<T>::init(d_model, d_model, rng);
        p.o = LinearParams<T>::init(d_model, d_model, rng);
        return p;
    }

    template <typename F>
    void visit_params(const std::string& prefix, F&& fn) {
        q.visit_params(prefix + ".q", fn);
        k.visit_params(prefix + ".k", fn);
        v.visit_params(prefix + ".v", fn);
        o.visit_params(prefix + ".o", fn);
    }
};

// Multi-head scaled dot-product attention over a single sequence [T, d].
// `valid` (optional) masks key positions that must not be attended.
template <typename T>
Tensor<T> attention(const AttentionParams<T>& p, const Tensor<T>& x, Index n_heads, bool causal,
                    const std::vector<std::uint8_t>* valid, ForwardCtx& ctx) {
    Index t_len = x.rows(), d_model = x.cols();
    if (d_model % n_heads != 0) throw ShapeError("attention: d_model not divisible by heads");
    Index d_head = d_model / n_heads;

    Tensor<T> q = apply_linear(p.q, x, ctx);
    Tensor<T> k = apply_linear(p.k, x, ctx);
    Tensor<T> v = apply_linear(p.v, x, ctx);

    Tensor<T> mask;
    if (causal || valid) mask = attention_mask<T>(t_len, causal, valid);

    T inv_sqrt = static_cast<T>(1.0 / std::sqrt(static_cast<double>(d_head)));
    std::vector<Tensor<T>> heads;
    heads.reserve(n_heads);
    for (Index h = 0; h < n_heads; ++h) {
        Tensor<T> qh = slice_cols(q, h * d_head, d_head);
        Tensor<T> kh = slice_cols(k, h * d_head, d_head);
        Tensor<T> vh = slice_cols(v, h * d_head, d_head);
        Tensor<T> scores = scale(matmul_nt(qh, kh), inv_sqrt);
        if (mask.defined()) scores = add(scores, mask);
        heads.push_back(matmul(softmax_rows(scores), vh));
    }
    return apply_linear(p.o, concat_cols(heads), ctx);
}

template <typename T>
struct BlockParams {
    Tensor<T> ln1_g, ln1_b;
    AttentionParams<T> attn;
    Tensor<T> ln2_g, ln2_b;
    LinearParams<T> fc1, fc2;  // MLP with 4x expansion

    static BlockParams init(Index d_model, Rng& rng) {
        BlockParams p;
        p.ln1_g = Tensor<T>::full({d_model}, T(1), true);
        p.ln1_b = Tensor<T>::zeros({d_model}, true);
        p.attn = AttentionParams<T>::init(d_model, rng);
        p.ln2_g = Tensor<T>::full({d_model}, T(1), true);
        p.ln2_b = Tensor<T>::zeros({d_model}, true);
        p.fc1 = LinearParams<T>::init(d_model, 4 * d_model, rng);
        p.fc2 = LinearParams<T>::init(4 * d_model, d_model, rng);
        return p;
    }

    template <typename F>
    void visit_params(const std::string& prefix, F&& fn) {
        fn(prefix + ".ln1.gamma", ln1_g);
        fn(prefix + ".ln1.beta", ln1_b);
        attn.visit_params(prefix + ".attn", fn);
        fn(prefix + ".ln2.gamma", ln2_g);
        fn(prefix + ".ln2.beta", ln2_b);
        fc1.visit_params(prefix + ".mlp.fc1", fn);
        fc2.visit_params(prefix + ".mlp.fc2", fn);
    }
};

template <typename T>
Tensor<T> transformer_block(const BlockParams<T>& p, const Tensor<T>& x, Index n_heads,
                            bool causal, const std::vector<std::uint8_t>* valid, ForwardCtx& ctx) {
    Tensor<T> a = attention(p.attn, layer_norm(x, p.ln1_g, p.ln1_b, static_cast<T>(kLnEps)),
                            n_heads, causal, valid, ctx);
    Tensor<T> h = add(x, a);
    Tensor<T> m = apply_linear(
        p.fc2, gelu(apply_linear(p.fc1, layer_norm(h, p.ln2_g, p.ln2_b, static_cast<T>(kLnEps)), ctx)),
        ctx);
    return add(h, m);
}

// Fixed sinusoidal positions, interleaved sin/cos halves.
template <typename T>
Tensor<T> sinusoid_positions(Index t_len, Index d_model) {
    Index half = d_model / 2;
    if (half < 2) throw ShapeError("sinusoid_positions: d_model too small");
    std::vector<T> pe(t_len * d_model, T(0));
    double log_timescale = std::log(10000.0) / static_cast<double>(half - 1);
    for (Index t = 0; t < t_len; ++t)
        for (Index i = 0; i < half; ++i) {
            double inv = std::exp(-log_timescale * static_cast<double>(i));
            double a = static_cast<double>(t) * inv;
            pe[t * d_model + i] = static_cast<T>(std::sin(a));
            pe[t * d_model + half + i] = static_cast<T>(std::cos(a));
        }
    return Tensor<T>::from({t_len, d_model}, std::move(pe));
}

}  // namespace alm
