// Copyright (c) 2026 almlab contributors
// SPDX-License-Identifier: Apache-2.0
//
// Strict JSON (de)serialization for all run configs. Unknown keys are always
// an error so typos cannot silently fall back to defaults.

#pragma once

#include <set>
#include <string>

#include <json.hpp>

#include "almlab/bundle.hpp"
#include "almlab/data.hpp"
#include "almlab/lm.hpp"
#include "almlab/train_config.hpp"

namespace alm {

namespace cfgjson {

inline void reject_unknown(const nlohmann::json& j, const std::set<std::string>& allowed,
                           const std::string& where) {
    if (!j.is_object()) throw UsageError("config: " + where + " must be an object");
    for (const auto& [key, _] : j.items())
        if (!allowed.count(key))
            throw UsageError("config: unknown key '" + where + "." + key + "'");
}

}  // namespace cfgjson

inline nlohmann::json to_json(const EncoderConfig& c) {
    return {{"n_layers", c.n_layers}, {"d_model", c.d_model},     {"n_heads", c.n_heads},
            {"n_mels", c.n_mels},     {"max_frames", c.max_frames}};
}

inline EncoderConfig encoder_config_from_json(const nlohmann::json& j) {
    cfgjson::reject_unknown(j, {"n_layers", "d_model", "n_heads", "n_mels", "max_frames"},
                            "encoder");
    EncoderConfig c;
    c.n_layers = j.value("n_layers", c.n_layers);
    c.d_model = j.value("d_model", c.d_model);
    c.n_heads = j.value("n_heads", c.n_heads);
    c.n_mels = j.value("n_mels", c.n_mels);
    c.max_frames = j.value("max_frames", c.max_frames);
    c.validate();
    return c;
}

inline std::string reduce_name(Reduce r) {
    switch (r) {
        case Reduce::None: return "none";
        case Reduce::Pool: return "pool";
        case Reduce::Stack: return "stack";
    }
    return "pool";
}

inline Reduce reduce_from_name(const std::string& s) {
    if (s == "none") return Reduce::None;
    if (s == "pool") return Reduce::Pool;
    if (s == "stack") return Reduce::Stack;
    throw UsageError("config: connector.reduction must be none|pool|stack, got '" + s + "'");
}

inline nlohmann::json to_json(const ConnectorConfig& c) {
    return {{"reduction", reduce_name(c.reduction)},
            {"k", c.k},
            {"d_in", c.d_in},
            {"d_lm", c.d_lm},
            {"layer_agg", c.layer_agg},
            {"agg_every", c.agg_every},
            {"agg_position", c.agg_position == AggPosition::Before ? "before" : "after"}};
}

inline ConnectorConfig connector_config_from_json(const nlohmann::json& j) {
    cfgjson::reject_unknown(
        j, {"reduction", "k", "d_in", "d_lm", "layer_agg", "agg_every", "agg_position"},
        "connector");
    ConnectorConfig c;
    if (j.contains("reduction")) c.reduction = reduce_from_name(j.at("reduction").get<std::string>());
    c.k = j.value("k", c.k);
    c.d_in = j.value("d_in", c.d_in);
    c.d_lm = j.value("d_lm", c.d_lm);
    c.layer_agg = j.value("layer_agg", c.layer_agg);
    c.agg_every = j.value("agg_every", c.agg_every);
    if (j.contains("agg_position")) {
        std::string p = j.at("agg_position").get<std::string>();
        if (p != "before" && p != "after")
            throw UsageError("config: connector.agg_position must be before|after");
        c.agg_position = p == "before" ? AggPosition::Before : AggPosition::After;
    }
    c.validate();
    return c;
}

inline nlohmann::json to_json(const LmConfig& c) {
    return {{"vocab_size", c.vocab_size}, {"d_lm", c.d_lm},
            {"n_layers", c.n_layers},     {"n_heads", c.n_heads},
            {"max_seq_len", c.max_seq_len}, {"audio_token_id", c.audio_token_id}};
}

inline LmConfig lm_config_from_json(const nlohmann::json& j) {
    cfgjson::reject_unknown(
        j, {"vocab_size", "d_lm", "n_layers", "n_heads", "max_seq_len", "audio_token_id"}, "lm");
    LmConfig c;
    c.vocab_size = j.value("vocab_size", c.vocab_size);
    c.d_lm = j.value("d_lm", c.d_lm);
    c.n_layers = j.value("n_layers", c.n_layers);
    c.n_heads = j.value("n_heads", c.n_heads);
    c.max_seq_len = j.value("max_seq_len", c.max_seq_len);
    c.audio_token_id = j.value("audio_token_id", c.audio_token_id);
    c.validate();
    return c;
}

inline nlohmann::json to_json(const LoraConfig& c) {
    nlohmann::json targets = nlohmann::json::array();
    if (c.targets.count(LoraTarget::EncoderAttn)) targets.push_back("encoder_attn");
    if (c.targets.count(LoraTarget::LmAttn)) targets.push_back("lm_attn");
    return {{"rank", c.rank}, {"alpha", c.alpha}, {"dropout", c.dropout_p}, {"targets", targets}};
}

inline LoraConfig lora_config_from_json(const nlohmann::json& j) {
    cfgjson::reject_unknown(j, {"rank", "alpha", "dropout", "targets"}, "lora");
    LoraConfig c;
    c.rank = j.value("rank", c.rank);
    c.alpha = j.value("alpha", c.alpha);
    c.dropout_p = j.value("dropout", c.dropout_p);
    if (j.contains("targets")) {
        c.targets.clear();
        for (const auto& t : j.at("targets")) {
            std::string name = t.get<std::string>();
            if (name == "encoder_attn")
                c.targets.insert(LoraTarget::EncoderAttn);
            else if (name == "lm_attn")
                c.targets.insert(LoraTarget::LmAttn);
            else
                throw UsageError("config: lora.targets entries must be encoder_attn|lm_attn");
        }
    }
    c.validate();
    return c;
}

inline nlohmann::json to_json(const FreezeConfig& c) {
    return {{"train_encoder", c.train_encoder},
            {"train_projector", c.train_projector},
            {"train_lm", c.train_lm}};
}

inline FreezeConfig freeze_config_from_json(const nlohmann::json& j) {
    cfgjson::reject_unknown(j, {"train_encoder", "train_projector", "train_lm"}, "freeze");
    FreezeConfig c;
    c.train_encoder = j.value("train_encoder", c.train_encoder);
    c.train_projector = j.value("train_projector", c.train_projector);
    c.train_lm = j.value("train_lm", c.train_lm);
    c.validate();
    return c;
}

inline nlohmann::json to_json(const TrainConfig& c) {
    return {{"epochs", c.epochs},
            {"lr_max", c.lr_max},
            {"warmup_ratio", c.warmup_ratio},
            {"weight_decay", c.weight_decay},
            {"grad_clip_norm", c.grad_clip_norm},
            {"batch_size", c.batch_size},
            {"seed", c.seed},
            {"schedule", c.schedule},
            {"checkpoint_every", c.checkpoint_every},
            {"two_stage", c.two_stage}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
    cfgjson::reject_unknown(j,
                            {"epochs", "lr_max", "warmup_ratio", "weight_decay", "grad_clip_norm",
                             "batch_size", "seed", "schedule", "checkpoint_every", "two_stage"},
                            "train");
    TrainConfig c;
    c.epochs = j.value("epochs", c.epochs);
    c.lr_max = j.value("lr_max", c.lr_max);
    c.warmup_ratio = j.value("warmup_ratio", c.warmup_ratio);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.grad_clip_norm = j.value("grad_clip_norm", c.grad_clip_norm);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.seed = j.value("seed", c.seed);
    c.schedule = j.value("schedule", c.schedule);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
    c.two_stage = j.value("two_stage", c.two_stage);
    c.validate();
    return c;
}

inline nlohmann::json to_json(const GenerationConfig& c) {
    return {{"temperature", c.temperature},
            {"top_p", c.top_p},
            {"top_k", c.top_k},
            {"max_new_tokens", c.max_new_tokens},
            {"repetition_penalty", c.repetition_penalty},
            {"seed", c.seed}};
}

inline GenerationConfig generation_config_from_json(const nlohmann::json& j) {
    cfgjson::reject_unknown(
        j, {"temperature", "top_p", "top_k", "max_new_tokens", "repetition_penalty", "seed"},
        "generate");
    GenerationConfig c;
    c.temperature = j.value("temperature", c.temperature);
    c.top_p = j.value("top_p", c.top_p);
    c.top_k = j.value("top_k", c.top_k);
    c.max_new_tokens = j.value("max_new_tokens", c.max_new_tokens);
    c.repetition_penalty = j.value("repetition_penalty", c.repetition_penalty);
    c.seed = j.value("seed", c.seed);
    c.validate();
    return c;
}

inline nlohmann::json to_json(const CollateConfig& c) {
    return {{"audio_max_seconds", c.audio_max_seconds},
            {"n_mels", c.n_mels},
            {"system_text", c.system_text},
            {"base_dir", c.base_dir},
            {"threads", c.threads}};
}

inline CollateConfig collate_config_from_json(const nlohmann::json& j) {
    cfgjson::reject_unknown(j, {"audio_max_seconds", "n_mels", "system_text", "base_dir", "threads"},
                            "data");
    CollateConfig c;
    c.audio_max_seconds = j.value("audio_max_seconds", c.audio_max_seconds);
    c.n_mels = j.value("n_mels", c.n_mels);
    c.system_text = j.value("system_text", c.system_text);
    c.base_dir = j.value("base_dir", c.base_dir);
    c.threads = j.value("threads", c.threads);
    if (c.audio_max_seconds <= 0) throw UsageError("config: data.audio_max_seconds must be > 0");
    return c;
}

}  // namespace alm
