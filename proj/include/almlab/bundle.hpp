// Copyright (c) 2026 almlab contributors
// SPDX-License-Identifier: Apache-2.0
//
// ModelBundle ties encoder, connector, and LM parameters together with their
// configs, the adapter state, and the freeze mask, and provides the
// mel -> audio-embedding -> merged-LM forward used by training and
// generation.

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "almlab/connector.hpp"
#include "almlab/encoder.hpp"
#include "almlab/lm.hpp"

namespace alm {

enum class LoraTarget { EncoderAttn, LmAttn };

struct LoraConfig {
    int rank = 8;
    double alpha = 16.0;
    double dropout_p = 0.05;
    std::set<LoraTarget> targets = {LoraTarget::EncoderAttn, LoraTarget::LmAttn};

    void validate() const {
        if (rank < 1) throw UsageError("lora: rank must be >= 1");
        if (dropout_p < 0 || dropout_p >= 1) throw UsageError("lora: dropout must be in [0,1)");
        if (targets.empty()) throw UsageError("lora: no targets");
    }

    double scaling() const { return alpha / static_cast<double>(rank); }
};

struct FreezeConfig {
    bool train_encoder = true;
    bool train_projector = true;
    bool train_lm = true;

    void validate() const {
        if (!train_encoder && !train_projector && !train_lm)
            throw UsageError("freeze: at least one module must be trainable");
    }
};

template <typename T>
struct ModelBundle {
    EncoderConfig enc_cfg;
    ConnectorConfig conn_cfg;
    LmConfig lm_cfg;
    std::optional<LoraConfig> lora_cfg;  // set once adapters are attached
    FreezeConfig freeze;

    EncoderParams<T> encoder;
    ProjectorParams<T> projector;
    LmParams<T> lm;

    static ModelBundle init(const EncoderConfig& ec, const ConnectorConfig& cc, const LmConfig& lc,
                            std::uint64_t seed) {
        ec.validate();
        cc.validate();
        lc.validate();
        if (cc.d_in != ec.d_model)
            throw UsageError("bundle: connector d_in must equal encoder d_model");
        if (cc.d_lm != lc.d_lm) throw UsageError("bundle: connector d_lm must equal LM d_lm");
        ModelBundle b;
        b.enc_cfg = ec;
        b.conn_cfg = cc;
        b.lm_cfg = lc;
        Rng enc_rng(mix_seed(seed, 1));
        Rng proj_rng(mix_seed(seed, 2));
        Rng lm_rng(mix_seed(seed, 3));
        b.encoder = EncoderParams<T>::init(ec, enc_rng);
        b.projector = ProjectorParams<T>::init(cc, proj_rng);
        b.lm = LmParams<T>::init(lc, lm_rng);
        return b;
    }

    template <typename F>
    void for_each_param(F&& fn) {
        encoder.visit_params("encoder", fn);
        projector.visit_params("projector", fn);
        lm.visit_params("lm", fn);
    }

    void zero_grads() {
        for_each_param([](const std::string&, Tensor<T>& t) { t.zero_grad(); });
    }

    // mel -> encoder -> connector; returns audio embeddings [T_a, d_lm]
    Tensor<T> audio_embeddings(const MelSpectrogram& mel, ForwardCtx& ctx) const {
        LayerFeatures<T> features = encode(mel, enc_cfg, encoder, ctx);
        return connect(features, conn_cfg, projector);
    }

    Tensor<T> logits(const MelSpectrogram& mel, const std::vector<int>& token_ids,
                     std::optional<CompletionSpan> completion, ForwardCtx& ctx,
                     const std::vector<std::uint8_t>* attn_valid = nullptr,
                     MergedSequence<T>* out_seq = nullptr) const {
        Tensor<T> audio = audio_embeddings(mel, ctx);
        MergedSequence<T> seq = merge_embeddings(audio, token_ids, lm, lm_cfg, completion);
        if (attn_valid) {
            if (attn_valid->size() != seq.total_len())
                throw ShapeError("bundle: attention validity mask length mismatch");
            seq.attn_valid = *attn_valid;
        }
        Tensor<T> out = lm_forward(seq, lm, lm_cfg, ctx);
        if (out_seq) *out_seq = seq;
        return out;
    }
};

struct ParamCounts {
    std::size_t encoder = 0;
    std::size_t projector = 0;
    std::size_t lm = 0;
    std::size_t total = 0;
};

template <typename T>
ParamCounts count_params(ModelBundle<T>& bundle) {
    ParamCounts counts;
    bundle.for_each_param([&](const std::string& name, Tensor<T>& t) {
        std::size_t n = t.numel();
        if (name.rfind("encoder.", 0) == 0)
            counts.encoder += n;
        else if (name.rfind("projector.", 0) == 0)
            counts.projector += n;
        else
            counts.lm += n;
    });
    counts.total = counts.encoder + counts.projector + counts.lm;
    return counts;
}

}  // namespace alm
