// Copyright (c) 2026 almlab contributors
// SPDX-License-Identifier: Apache-2.0
//
// Low-rank adapters on the attention projections (q, k, v, o) of encoder and
// LM blocks. A is normal(0, 0.02), B starts at zero, so a freshly attached
// adapter leaves the model function unchanged; base weights freeze at attach
// time. set_trainable applies the module-level freeze grid on top.

#pragma once

#include <string>
#include <vector>

#include "almlab/bundle.hpp"
#include "almlab/layers.hpp"

namespace alm {

namespace detail {

template <typename T>
void attach_adapter(LinearParams<T>& lin, const LoraConfig& cfg, Rng& rng) {
    if (lin.lora) throw UsageError("lora: adapter already attached");
    LoraAdapter<T> adapter;
    adapter.a = Tensor<T>::randn({lin.w.rows(), static_cast<Index>(cfg.rank)}, rng,
                                 static_cast<T>(kInitStd), true);
    adapter.b = Tensor<T>::zeros({static_cast<Index>(cfg.rank), lin.w.cols()}, true);
    adapter.scaling = cfg.scaling();
    adapter.dropout_p = cfg.dropout_p;
    lin.lora = std::move(adapter);
    lin.w.set_requires_grad(false);
    lin.b.set_requires_grad(false);
}

template <typename T>
void attach_block_adapters(std::vector<BlockParams<T>>& blocks, const LoraConfig& cfg, Rng& rng) {
    for (auto& block : blocks) {
        attach_adapter(block.attn.q, cfg, rng);
        attach_adapter(block.attn.k, cfg, rng);
        attach_adapter(block.attn.v, cfg, rng);
        attach_adapter(block.attn.o, cfg, rng);
    }
}

}  // namespace detail

template <typename T>
void attach_lora(ModelBundle<T>& bundle, const LoraConfig& cfg, std::uint64_t seed = 0) {
    cfg.validate();
    if (bundle.lora_cfg) throw UsageError("lora: bundle already has adapters attached");
    Rng rng(mix_seed(seed, 0x10ad));
    if (cfg.targets.count(LoraTarget::EncoderAttn))
        detail::attach_block_adapters(bundle.encoder.blocks, cfg, rng);
    if (cfg.targets.count(LoraTarget::LmAttn))
        detail::attach_block_adapters(bundle.lm.blocks, cfg, rng);
    bundle.lora_cfg = cfg;
}

inline bool is_lora_param(const std::string& name) {
    return name.size() > 7 && (name.rfind(".lora_a") == name.size() - 7 ||
                               name.rfind(".lora_b") == name.size() - 7);
}

// Applies the freeze grid and returns the trainable parameter names. A module
// with adapters trains only through them; without adapters it trains fully.
template <typename T>
std::vector<std::string> set_trainable(ModelBundle<T>& bundle, const FreezeConfig& freeze) {
    freeze.validate();
    bundle.freeze = freeze;
    bool enc_lora = bundle.lora_cfg && bundle.lora_cfg->targets.count(LoraTarget::EncoderAttn);
    bool lm_lora = bundle.lora_cfg && bundle.lora_cfg->targets.count(LoraTarget::LmAttn);

    std::vector<std::string> trainable;
    bundle.for_each_param([&](const std::string& name, Tensor<T>& t) {
        bool is_lora = is_lora_param(name);
        bool on;
        if (name.rfind("encoder.", 0) == 0)
            on = freeze.train_encoder && (enc_lora ? is_lora : true);
        else if (name.rfind("projector.", 0) == 0)
            on = freeze.train_projector;
        else
            on = freeze.train_lm && (lm_lora ? is_lora : true);
        t.set_requires_grad(on);
        if (on) trainable.push_back(name);
    });
    if (trainable.empty()) throw UsageError("set_trainable: empty trainable set");
    return trainable;
}

namespace detail {

template <typename T>
void fold_adapter(LinearParams<T>& lin) {
    if (!lin.lora) return;
    const auto& a = lin.lora->a.data();
    const auto& b = lin.lora->b.data();
    Index d_in = lin.w.rows(), d_out = lin.w.cols();
    Index r = lin.lora->a.cols();
    auto& w = lin.w.data();
    T s = static_cast<T>(lin.lora->scaling);
    for (Index i = 0; i < d_in; ++i)
        for (Index p = 0; p < r; ++p) {
            T av = a[i * r + p] * s;
            if (av == T(0)) continue;
            for (Index j = 0; j < d_out; ++j) w[i * d_out + j] += av * b[p * d_out + j];
        }
    lin.lora.reset();
}

}  // namespace detail

// Folds every adapter into its base weight (W += scaling * A * B) and removes
// it. Inference-time convenience; never used during training.
template <typename T>
void merge_lora(ModelBundle<T>& bundle) {
    if (!bundle.lora_cfg) return;
    auto fold_blocks = [](std::vector<BlockParams<T>>& blocks) {
        for (auto& block : blocks) {
            detail::fold_adapter(block.attn.q);
            detail::fold_adapter(block.attn.k);
            detail::fold_adapter(block.attn.v);
            detail::fold_adapter(block.attn.o);
        }
    };
    fold_blocks(bundle.encoder.blocks);
    fold_blocks(bundle.lm.blocks);
    bundle.lora_cfg.reset();
}

}  // namespace alm
