// Copyright (c) 2026 almlab contributors
// SPDX-License-Identifier: Apache-2.0
//
// Whisper-shaped audio encoder at configurable scale: two temporal
// convolutions (the second with stride 2, so 100 mel frames/s become 50
// tokens/s), fixed sinusoidal positions, then a stack of bidirectional
// pre-norm transformer blocks. All per-layer outputs are returned so the
// connector can aggregate intermediate features.

#pragma once

#include <string>
#include <vector>

#include "almlab/layers.hpp"
#include "almlab/mel.hpp"
#include "almlab/tensor.hpp"

namespace alm {

struct EncoderConfig {
    int n_layers = 2;
    int d_model = 32;
    int n_heads = 2;
    int n_mels = 80;
    int max_frames = 400;

    void validate() const {
        if (n_layers < 1) throw UsageError("encoder: n_layers must be >= 1");
        if (d_model < 4 || d_model % n_heads != 0)
            throw UsageError("encoder: d_model must be a positive multiple of n_heads");
        if (n_mels < 1 || max_frames < 1) throw UsageError("encoder: bad mel/frame config");
    }

    // ceil(n_frames / 2) from the stride-2 convolution
    static Index out_tokens(Index n_frames) { return (n_frames + 1) / 2; }
};

template <typename T>
struct EncoderParams {
    Tensor<T> conv1_w, conv1_b;  // [3*n_mels, d], [d]
    Tensor<T> conv2_w, conv2_b;  // [3*d, d], [d]
    std::vector<BlockParams<T>> blocks;

    static EncoderParams init(const EncoderConfig& cfg, Rng& rng) {
        cfg.validate();
        EncoderParams p;
        Index d = static_cast<Index>(cfg.d_model);
        p.conv1_w = Tensor<T>::randn({3 * static_cast<Index>(cfg.n_mels), d}, rng,
                                     static_cast<T>(kInitStd), true);
        p.conv1_b = Tensor<T>::zeros({d}, true);
        p.conv2_w = Tensor<T>::randn({3 * d, d}, rng, static_cast<T>(kInitStd), true);
        p.conv2_b = Tensor<T>::zeros({d}, true);
        p.blocks.reserve(static_cast<std::size_t>(cfg.n_layers));
        for (int l = 0; l < cfg.n_layers; ++l) p.blocks.push_back(BlockParams<T>::init(d, rng));
        return p;
    }

    template <typename F>
    void visit_params(const std::string& prefix, F&& fn) {
        fn(prefix + ".conv1.weight", conv1_w);
        fn(prefix + ".conv1.bias", conv1_b);
        fn(prefix + ".conv2.weight", conv2_w);
        fn(prefix + ".conv2.bias", conv2_b);
        for (std::size_t l = 0; l < blocks.size(); ++l)
            blocks[l].visit_params(prefix + ".block" + std::to_string(l), fn);
    }
};

// Outputs of the post-conv embedding (index 0) and every transformer layer;
// the last entry is the final audio representation.
template <typename T>
struct LayerFeatures {
    std::vector<Tensor<T>> per_layer;

    const Tensor<T>& final_layer() const { return per_layer.back(); }
    std::size_t n_layers() const { return per_layer.size() - 1; }
};

template <typename T>
Tensor<T> mel_to_tensor(const MelSpectrogram& mel) {
    std::vector<T> data(mel.values.size());
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = static_cast<T>(mel.values[i]);
    return Tensor<T>::from({mel.n_frames, mel.n_mels}, std::move(data));
}

template <typename T>
LayerFeatures<T> encode(const MelSpectrogram& mel, const EncoderConfig& cfg,
                        const EncoderParams<T>& params, ForwardCtx& ctx) {
    cfg.validate();
    if (mel.n_mels != static_cast<std::size_t>(cfg.n_mels))
        throw ShapeError("encode: mel bands " + std::to_string(mel.n_mels) + " != config " +
                         std::to_string(cfg.n_mels));
    if (mel.n_frames > static_cast<std::size_t>(cfg.max_frames))
        throw UsageError("encode: " + std::to_string(mel.n_frames) + " frames exceed max_frames " +
                         std::to_string(cfg.max_frames));
    if (params.blocks.size() != static_cast<std::size_t>(cfg.n_layers))
        throw ShapeError("encode: parameter/config layer count mismatch");

    Tensor<T> x = mel_to_tensor<T>(mel);
    x = gelu(conv1d(x, params.conv1_w, params.conv1_b, 3, 1, 1));
    x = gelu(conv1d(x, params.conv2_w, params.conv2_b, 3, 2, 1));
    x = add(x, sinusoid_positions<T>(x.rows(), x.cols()));

    LayerFeatures<T> features;
    features.per_layer.reserve(params.blocks.size() + 1);
    features.per_layer.push_back(x);
    for (const auto& block : params.blocks) {
        x = transformer_block(block, x, static_cast<Index>(cfg.n_heads), /*causal=*/false,
                              /*valid=*/nullptr, ctx);
        features.per_layer.push_back(x);
    }
    return features;
}

}  // namespace alm
