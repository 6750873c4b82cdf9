// Copyright (c) 2026 almlab contributors
// SPDX-License-Identifier: Apache-2.0
//
// Sequence reduction (mean pooling or frame stacking) followed by the
// two-layer projector that maps encoder features into the LM embedding
// space: LayerNorm -> Linear -> GELU -> Linear -> LayerNorm, per frame.
// Optional layer aggregation mixes intermediate encoder layers either before
// the reduction+projection or after per-layer projection with shared weights.

#pragma once

#include <string>
#include <vector>

#include "almlab/encoder.hpp"
#include "almlab/layers.hpp"
#include "almlab/tensor.hpp"

namespace alm {

enum class Reduce { None, Pool, Stack };
enum class AggPosition { Before, After };

struct ConnectorConfig {
    Reduce reduction = Reduce::Pool;
    int k = 2;
    int d_in = 32;   // encoder d_model
    int d_lm = 64;   // LM embedding width
    bool layer_agg = false;
    int agg_every = 0;
    AggPosition agg_position = AggPosition::Before;

    void validate() const {
        if (d_in < 1 || d_lm < 1) throw UsageError("connector: widths must be positive");
        switch (reduction) {
            case Reduce::None:
                break;
            case Reduce::Pool:
                if (k < 1) throw UsageError("connector: pool k must be >= 1");
                break;
            case Reduce::Stack:
                if (k != 1 && k != 2 && k != 4 && k != 8)
                    throw UsageError("connector: stack k must be one of {1,2,4,8}");
                break;
        }
        if (layer_agg && agg_every < 1)
            throw UsageError("connector: agg_every must be >= 1 when layer_agg is on");
    }

    int d_in_effective() const { return reduction == Reduce::Stack ? d_in * k : d_in; }

    Index out_tokens(Index t_enc) const {
        Index kk = reduction == Reduce::None ? 1 : static_cast<Index>(k);
        return (t_enc + kk - 1) / kk;
    }
};

template <typename T>
struct ProjectorParams {
    Tensor<T> ln1_g, ln1_b;  // pre-norm over projector input
    Tensor<T> w1, b1;        // [d_in_eff, d_lm]
    Tensor<T> w2, b2;        // [d_lm, d_lm]
    Tensor<T> ln2_g, ln2_b;  // post-norm over d_lm

    static ProjectorParams init(const ConnectorConfig& cfg, Rng& rng) {
        cfg.validate();
        Index d_in = static_cast<Index>(cfg.d_in_effective());
        Index d_lm = static_cast<Index>(cfg.d_lm);
        ProjectorParams p;
        p.ln1_g = Tensor<T>::full({d_in}, T(1), true);
        p.ln1_b = Tensor<T>::zeros({d_in}, true);
        p.w1 = Tensor<T>::randn({d_in, d_lm}, rng, static_cast<T>(kInitStd), true);
        p.b1 = Tensor<T>::zeros({d_lm}, true);
        p.w2 = Tensor<T>::randn({d_lm, d_lm}, rng, static_cast<T>(kInitStd), true);
        p.b2 = Tensor<T>::zeros({d_lm}, true);
        p.ln2_g = Tensor<T>::full({d_lm}, T(1), true);
        p.ln2_b = Tensor<T>::zeros({d_lm}, true);
        return p;
    }

    template <typename F>
    void visit_params(const std::string& prefix, F&& fn) {
        fn(prefix + ".ln1.gamma", ln1_g);
        fn(prefix + ".ln1.beta", ln1_b);
        fn(prefix + ".fc1.weight", w1);
        fn(prefix + ".fc1.bias", b1);
        fn(prefix + ".fc2.weight", w2);
        fn(prefix + ".fc2.bias", b2);
        fn(prefix + ".ln2.gamma", ln2_g);
        fn(prefix + ".ln2.beta", ln2_b);
    }
};

template <typename T>
Tensor<T> pool(const Tensor<T>& features, Index k) {
    return mean_pool_rows(features, k);
}

template <typename T>
Tensor<T> stack(const Tensor<T>& features, Index k) {
    if (k != 1 && k != 2 && k != 4 && k != 8)
        throw UsageError("stack: k must be one of {1,2,4,8}");
    return stack_rows(features, k);
}

// LN -> fc1 -> GELU -> fc2 -> LN, applied per frame.
template <typename T>
Tensor<T> project(const Tensor<T>& features, const ProjectorParams<T>& p) {
    if (features.cols() != p.w1.rows())
        throw ShapeError("project: feature width " + std::to_string(features.cols()) +
                         " does not match projector input " + std::to_string(p.w1.rows()));
    Tensor<T> h = layer_norm(features, p.ln1_g, p.ln1_b, static_cast<T>(kLnEps));
    h = add_bias(matmul(h, p.w1), p.b1);
    h = gelu(h);
    h = add_bias(matmul(h, p.w2), p.b2);
    return layer_norm(h, p.ln2_g, p.ln2_b, static_cast<T>(kLnEps));
}

template <typename T>
Tensor<T> reduce_sequence(const Tensor<T>& features, const ConnectorConfig& cfg) {
    switch (cfg.reduction) {
        case Reduce::None:
            return features;
        case Reduce::Pool:
            return pool(features, static_cast<Index>(cfg.k));
        case Reduce::Stack:
            return stack(features, static_cast<Index>(cfg.k));
    }
    throw UsageError("connector: bad reduction");
}

// Layers {every_k, 2*every_k, ...} counted from 1; the final layer is always
// included.
inline std::vector<std::size_t> selected_layers(std::size_t n_layers, std::size_t every_k) {
    if (every_k == 0 || every_k > n_layers)
        throw UsageError("layer aggregation: every_k must be in [1, n_layers]");
    std::vector<std::size_t> sel;
    for (std::size_t l = every_k; l <= n_layers; l += every_k) sel.push_back(l);
    if (sel.empty() || sel.back() != n_layers) sel.push_back(n_layers);
    return sel;
}

template <typename T>
Tensor<T> aggregate_layers(const LayerFeatures<T>& layers, std::size_t every_k,
                           AggPosition position, const ConnectorConfig& cfg,
                           const ProjectorParams<T>& params) {
    auto sel = selected_layers(layers.n_layers(), every_k);
    std::vector<Tensor<T>> picked;
    picked.reserve(sel.size());
    for (std::size_t l : sel) picked.push_back(layers.per_layer[l]);

    if (position == AggPosition::Before)
        return project(reduce_sequence(mean_of(picked), cfg), params);

    std::vector<Tensor<T>> projected;
    projected.reserve(picked.size());
    for (const auto& layer : picked)
        projected.push_back(project(reduce_sequence(layer, cfg), params));
    return mean_of(projected);
}

// Full connector: reduction + projection, with optional layer aggregation.
template <typename T>
Tensor<T> connect(const LayerFeatures<T>& layers, const ConnectorConfig& cfg,
                  const ProjectorParams<T>& params) {
    cfg.validate();
    if (cfg.layer_agg)
        return aggregate_layers(layers, static_cast<std::size_t>(cfg.agg_every),
                                cfg.agg_position, cfg, params);
    return project(reduce_sequence(layers.final_layer(), cfg), params);
}

}  // namespace alm
