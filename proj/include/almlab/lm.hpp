// Copyright (c) 2026 almlab contributors
// SPDX-License-Identifier: Apache-2.0
//
// Decoder-only LM with an audio slot: the single audio placeholder token in
// the prompt is replaced by the projected audio embedding rows, learned
// absolute positions are added over the merged sequence, and a causal
// transformer produces next-token logits. Sampling implements repetition
// penalty, temperature, top-k then nucleus truncation, with a seeded
// generator; temperature 0 degenerates to argmax.

#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "almlab/layers.hpp"
#include "almlab/tensor.hpp"
#include "almlab/tokenizer.hpp"

namespace alm {

struct LmConfig {
    int vocab_size = Tokenizer::kVocabSize;
    int d_lm = 64;
    int n_layers = 2;
    int n_heads = 2;
    int max_seq_len = 512;
    int audio_token_id = Tokenizer::kAudio;

    void validate() const {
        if (vocab_size < 2) throw UsageError("lm: vocab_size must be >= 2");
        if (audio_token_id < 0 || audio_token_id >= vocab_size)
            throw UsageError("lm: audio_token_id out of vocab range");
        if (n_layers < 1) throw UsageError("lm: n_layers must be >= 1");
        if (d_lm < 4 || d_lm % n_heads != 0)
            throw UsageError("lm: d_lm must be a positive multiple of n_heads");
        if (max_seq_len < 2) throw UsageError("lm: max_seq_len must be >= 2");
    }
};

template <typename T>
struct LmParams {
    Tensor<T> tok_emb;  // [V, d]
    Tensor<T> pos_emb;  // [max_seq_len, d]
    std::vector<BlockParams<T>> blocks;
    Tensor<T> ln_f_g, ln_f_b;
    LinearParams<T> head;  // [d, V]

    static LmParams init(const LmConfig& cfg, Rng& rng) {
        cfg.validate();
        Index d = static_cast<Index>(cfg.d_lm);
        LmParams p;
        p.tok_emb = Tensor<T>::randn({static_cast<Index>(cfg.vocab_size), d}, rng,
                                     static_cast<T>(kInitStd), true);
        p.pos_emb = Tensor<T>::randn({static_cast<Index>(cfg.max_seq_len), d}, rng,
                                     static_cast<T>(kInitStd), true);
        for (int l = 0; l < cfg.n_layers; ++l) p.blocks.push_back(BlockParams<T>::init(d, rng));
        p.ln_f_g = Tensor<T>::full({d}, T(1), true);
        p.ln_f_b = Tensor<T>::zeros({d}, true);
        p.head = LinearParams<T>::init(d, static_cast<Index>(cfg.vocab_size), rng);
        return p;
    }

    template <typename F>
    void visit_params(const std::string& prefix, F&& fn) {
        fn(prefix + ".tok_emb", tok_emb);
        fn(prefix + ".pos_emb", pos_emb);
        for (std::size_t l = 0; l < blocks.size(); ++l)
            blocks[l].visit_params(prefix + ".block" + std::to_string(l), fn);
        fn(prefix + ".ln_f.gamma", ln_f_g);
        fn(prefix + ".ln_f.beta", ln_f_b);
        head.visit_params(prefix + ".head", fn);
    }
};

template <typename T>
struct MergedSequence {
    Tensor<T> embeddings;               // [T_total, d], token + position embeddings
    std::vector<int> merged_ids;        // -1 on audio rows
    std::vector<std::uint8_t> loss_mask;  // true on completion-token positions
    std::vector<std::uint8_t> attn_valid;
    std::size_t audio_start = 0;
    std::size_t audio_len = 0;

    std::size_t total_len() const { return merged_ids.size(); }
};

// Span of completion tokens within the *text* token sequence.
struct CompletionSpan {
    std::size_t start = 0;
    std::size_t len = 0;
};

// Replaces the single audio placeholder in token_ids with the audio rows and
// adds positional embeddings over the merged sequence.
template <typename T>
MergedSequence<T> merge_embeddings(const Tensor<T>& audio_tokens, const std::vector<int>& token_ids,
                                   const LmParams<T>& params, const LmConfig& cfg,
                                   std::optional<CompletionSpan> completion = std::nullopt) {
    cfg.validate();
    std::size_t placeholder = token_ids.size();
    std::size_t n_placeholders = 0;
    for (std::size_t i = 0; i < token_ids.size(); ++i)
        if (token_ids[i] == cfg.audio_token_id) {
            placeholder = i;
            ++n_placeholders;
        }
    if (n_placeholders != 1)
        throw UsageError("merge: expected exactly one audio placeholder, found " +
                         std::to_string(n_placeholders));
    if (!audio_tokens.defined() || audio_tokens.rows() == 0)
        throw UsageError("merge: audio embeddings are empty");
    if (audio_tokens.cols() != static_cast<Index>(cfg.d_lm))
        throw ShapeError("merge: audio embedding width mismatch");

    std::size_t t_audio = audio_tokens.rows();
    std::size_t t_total = token_ids.size() - 1 + t_audio;
    if (t_total > static_cast<std::size_t>(cfg.max_seq_len))
        throw UsageError("merge: sequence length " + std::to_string(t_total) + " exceeds max " +
                         std::to_string(cfg.max_seq_len));

    std::vector<int> prefix(token_ids.begin(), token_ids.begin() + static_cast<std::ptrdiff_t>(placeholder));
    std::vector<int> suffix(token_ids.begin() + static_cast<std::ptrdiff_t>(placeholder) + 1,
                            token_ids.end());

    std::vector<Tensor<T>> parts;
    if (!prefix.empty()) parts.push_back(embedding(params.tok_emb, prefix));
    parts.push_back(audio_tokens);
    if (!suffix.empty()) parts.push_back(embedding(params.tok_emb, suffix));
    Tensor<T> emb = parts.size() == 1 ? parts[0] : concat_rows(parts);
    emb = add(emb, slice_rows(params.pos_emb, 0, t_total));

    MergedSequence<T> seq;
    seq.embeddings = emb;
    seq.audio_start = placeholder;
    seq.audio_len = t_audio;
    seq.merged_ids.assign(t_total, -1);
    for (std::size_t i = 0; i < placeholder; ++i) seq.merged_ids[i] = token_ids[i];
    for (std::size_t i = placeholder + 1; i < token_ids.size(); ++i)
        seq.merged_ids[i - 1 + t_audio] = token_ids[i];
    seq.loss_mask.assign(t_total, 0);
    if (completion) {
        for (std::size_t i = 0; i < completion->len; ++i) {
            std::size_t text_pos = completion->start + i;
            if (text_pos <= placeholder)
                throw UsageError("merge: completion span must follow the audio placeholder");
            seq.loss_mask[text_pos - 1 + t_audio] = 1;
        }
    }
    seq.attn_valid.assign(t_total, 1);
    return seq;
}

// Causal forward pass to next-token logits [T_total, V].
template <typename T>
Tensor<T> lm_forward(const MergedSequence<T>& seq, const LmParams<T>& params, const LmConfig& cfg,
                     ForwardCtx& ctx) {
    if (seq.total_len() > static_cast<std::size_t>(cfg.max_seq_len))
        throw UsageError("lm_forward: sequence exceeds max_seq_len");
    bool all_valid = std::all_of(seq.attn_valid.begin(), seq.attn_valid.end(),
                                 [](std::uint8_t v) { return v != 0; });
    const std::vector<std::uint8_t>* valid = all_valid ? nullptr : &seq.attn_valid;
    Tensor<T> x = seq.embeddings;
    for (const auto& block : params.blocks)
        x = transformer_block(block, x, static_cast<Index>(cfg.n_heads), /*causal=*/true, valid, ctx);
    x = layer_norm(x, params.ln_f_g, params.ln_f_b, static_cast<T>(kLnEps));
    return apply_linear(params.head, x, ctx);
}

struct GenerationConfig {
    double temperature = 0.1;
    double top_p = 0.8;
    int top_k = 500;
    int max_new_tokens = 32;
    double repetition_penalty = 1.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (temperature < 0) throw UsageError("generate: temperature must be >= 0");
        if (top_p <= 0 || top_p > 1) throw UsageError("generate: top_p must be in (0,1]");
        if (top_k < 1) throw UsageError("generate: top_k must be >= 1");
        if (max_new_tokens < 1) throw UsageError("generate: max_new_tokens must be >= 1");
        if (repetition_penalty <= 0) throw UsageError("generate: repetition_penalty must be > 0");
    }
};

namespace detail {

// CTRL-style penalty over previously generated ids: positive logits are
// divided, negative multiplied. Penalty 1.0 leaves logits untouched.
template <typename T>
void apply_repetition_penalty(std::vector<T>& logits, const std::unordered_set<int>& generated,
                              double penalty) {
    if (penalty == 1.0) return;
    for (int id : generated) {
        T& l = logits[static_cast<std::size_t>(id)];
        l = l > T(0) ? static_cast<T>(l / penalty) : static_cast<T>(l * penalty);
    }
}

template <typename T>
int sample_next(std::vector<T> logits, const GenerationConfig& gen,
                const std::unordered_set<int>& generated, const std::vector<int>& banned,
                Rng& rng) {
    for (int id : banned)
        if (id >= 0 && static_cast<std::size_t>(id) < logits.size())
            logits[static_cast<std::size_t>(id)] = T(-1e30);
    apply_repetition_penalty(logits, generated, gen.repetition_penalty);

    auto argmax = [&] {
        return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
    };
    if (gen.temperature == 0.0) return argmax();

    for (auto& l : logits) l = static_cast<T>(l / gen.temperature);

    // Rank candidates by logit, index-ascending on ties, keep top_k.
    std::vector<int> order(logits.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (logits[static_cast<std::size_t>(a)] != logits[static_cast<std::size_t>(b)])
            return logits[static_cast<std::size_t>(a)] > logits[static_cast<std::size_t>(b)];
        return a < b;
    });
    std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(gen.top_k), order.size());

    double mx = static_cast<double>(logits[static_cast<std::size_t>(order[0])]);
    std::vector<double> probs(keep);
    double total = 0.0;
    for (std::size_t i = 0; i < keep; ++i) {
        probs[i] = std::exp(static_cast<double>(logits[static_cast<std::size_t>(order[i])]) - mx);
        total += probs[i];
    }
    // Nucleus cut: smallest prefix of the sorted candidates reaching top_p.
    double cum = 0.0;
    std::size_t nucleus = keep;
    for (std::size_t i = 0; i < keep; ++i) {
        cum += probs[i] / total;
        if (cum >= gen.top_p) {
            nucleus = i + 1;
            break;
        }
    }
    double renorm = 0.0;
    for (std::size_t i = 0; i < nucleus; ++i) renorm += probs[i];
    double r = rng.uniform() * renorm;
    double acc = 0.0;
    for (std::size_t i = 0; i < nucleus; ++i) {
        acc += probs[i];
        if (r < acc) return order[i];
    }
    return order[nucleus - 1];
}

}  // namespace detail

// Samples up to max_new_tokens continuations of the merged prompt; stops at
// EOS (not included in the result).
template <typename T>
std::vector<int> generate(const std::vector<int>& prompt_ids, const Tensor<T>& audio_tokens,
                          const GenerationConfig& gen, const LmParams<T>& params,
                          const LmConfig& cfg, int eos_id = Tokenizer::kEos) {
    gen.validate();
    NoGradGuard ng;
    Rng rng(gen.seed);
    std::vector<int> ids = prompt_ids;
    std::vector<int> produced;
    std::unordered_set<int> generated_set;
    // A second audio slot or a pad token would corrupt the running sequence.
    std::vector<int> banned = {cfg.audio_token_id, Tokenizer::kPad};
    for (int step = 0; step < gen.max_new_tokens; ++step) {
        ForwardCtx ctx;  // inference: no dropout
        MergedSequence<T> seq = merge_embeddings(audio_tokens, ids, params, cfg);
        Tensor<T> logits = lm_forward(seq, params, cfg, ctx);
        Index vocab = logits.cols();
        Index last = logits.rows() - 1;
        std::vector<T> row(logits.data().begin() + static_cast<std::ptrdiff_t>(last * vocab),
                           logits.data().begin() + static_cast<std::ptrdiff_t>((last + 1) * vocab));
        int next = detail::sample_next(std::move(row), gen, generated_set, banned, rng);
        if (next == eos_id) break;
        produced.push_back(next);
        generated_set.insert(next);
        ids.push_back(next);
        if (seq.total_len() + 1 >= static_cast<std::size_t>(cfg.max_seq_len)) break;
    }
    return produced;
}

}  // namespace alm
