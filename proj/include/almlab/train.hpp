// Copyright (c) 2026 almlab contributors
// SPDX-License-Identifier: Apache-2.0
//
// Single-stage fine-tuning loop: masked NLL over completion tokens, global
// gradient-norm clipping, AdamW on the trainable set, cosine schedule with
// warmup. Everything stochastic derives from (config seed, step), so a run is
// reproducible from its config and resumable from a checkpoint mid-stream.

#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "almlab/checkpoint.hpp"
#include "almlab/data.hpp"
#include "almlab/lora.hpp"
#include "almlab/optim.hpp"
#include "almlab/train_config.hpp"

namespace alm {

// Merged-coordinate attention validity for one batch row: text mask with the
// placeholder expanded to t_audio always-valid rows.
inline std::vector<std::uint8_t> expand_attn_mask(const std::vector<std::uint8_t>& text_mask,
                                                  std::size_t placeholder_pos,
                                                  std::size_t t_audio) {
    std::vector<std::uint8_t> merged(text_mask.size() - 1 + t_audio, 1);
    for (std::size_t i = 0; i < placeholder_pos; ++i) merged[i] = text_mask[i];
    for (std::size_t i = placeholder_pos + 1; i < text_mask.size(); ++i)
        merged[i - 1 + t_audio] = text_mask[i];
    return merged;
}

// Token-mean NLL over the batch: per-sample completion-token losses summed,
// divided by the total number of unmasked target tokens.
template <typename T>
Tensor<T> nll_step(const Batch& batch, ModelBundle<T>& bundle, ForwardCtx& ctx) {
    std::vector<Tensor<T>> losses;
    std::size_t total_tokens = 0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        std::size_t t_audio =
            bundle.conn_cfg.out_tokens(EncoderConfig::out_tokens(batch.mels[i].n_frames));
        auto merged_valid = expand_attn_mask(batch.attn_mask[i], batch.placeholder_pos[i], t_audio);
        MergedSequence<T> seq;
        Tensor<T> logits = bundle.logits(batch.mels[i], batch.tokens[i], batch.completion[i], ctx,
                                         &merged_valid, &seq);
        std::size_t t_total = seq.total_len();
        // Position t predicts merged token t+1; only completion targets count.
        std::vector<int> targets(t_total - 1, 0);
        std::vector<std::uint8_t> mask(t_total - 1, 0);
        std::size_t count = 0;
        for (std::size_t t = 0; t + 1 < t_total; ++t) {
            targets[t] = seq.merged_ids[t + 1];
            mask[t] = seq.loss_mask[t + 1];
            if (mask[t]) ++count;
        }
        if (count == 0) continue;
        total_tokens += count;
        losses.push_back(cross_entropy(slice_rows(logits, 0, t_total - 1), targets, mask,
                                       Reduction::Sum));
    }
    if (losses.empty() || total_tokens == 0) throw DataError("nll_step: all positions masked");
    Tensor<T> total = losses[0];
    for (std::size_t i = 1; i < losses.size(); ++i) total = add(total, losses[i]);
    return scale(total, T(1) / static_cast<T>(total_tokens));
}

struct TrainLogRow {
    int step = 0;
    double lr = 0.0;
    double loss = 0.0;
};

template <typename T>
struct TrainResult {
    std::vector<TrainLogRow> curve;
    AdamState<T> adam;
    std::int64_t final_step = 0;
};

inline void write_loss_csv(const std::vector<TrainLogRow>& curve, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw DataError("train: cannot write " + path);
    os << "step,lr,loss\n";
    for (const auto& row : curve) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "%d,%.10g,%.10g\n", row.step, row.lr, row.loss);
        os << buf;
    }
}

struct TrainIo {
    std::string checkpoint_path;  // empty disables checkpointing
    std::string losses_csv_path;  // empty disables the CSV
    int halt_after_step = 0;      // > 0: stop early after this many steps (simulated interruption)
};

// One training stage over `data` with the bundle's current freeze mask.
// Returns the loss curve; optionally resumes from a loaded checkpoint.
template <typename T>
TrainResult<T> train(const TrainConfig& cfg, const std::vector<Sample>& data,
                     ModelBundle<T>& bundle, const CollateConfig& ccfg, const TrainIo& io = {},
                     const LoadedCheckpoint<T>* resume = nullptr) {
    cfg.validate();
    if (data.empty()) throw DataError("train: empty dataset");

    set_trainable(bundle, bundle.freeze);
    NamedTensors<T> trainables;
    bundle.for_each_param([&](const std::string& name, Tensor<T>& t) {
        if (t.requires_grad()) trainables.emplace_back(name, t);
    });

    Tokenizer tok;
    PreparedDataset prep = PreparedDataset::prepare(data, tok, ccfg);

    const int steps_per_epoch =
        static_cast<int>((data.size() + static_cast<std::size_t>(cfg.batch_size) - 1) /
                         static_cast<std::size_t>(cfg.batch_size));
    const int total_steps = cfg.epochs * steps_per_epoch;

    // Per-epoch orders derive from (seed, epoch) so a resumed run replays the
    // identical schedule.
    auto epoch_order = [&](int epoch) {
        std::vector<std::size_t> order(data.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng rng(mix_seed(cfg.seed, 0xE000 + static_cast<std::uint64_t>(epoch)));
        rng.shuffle(order);
        return order;
    };

    TrainResult<T> result;
    AdamHyper hyper;
    hyper.weight_decay = cfg.weight_decay;
    int start_step = 0;
    if (resume) {
        if (!resume->optimizer)
            throw UsageError("train: resume checkpoint has no optimizer state");
        result.adam = *resume->optimizer;
        start_step = static_cast<int>(resume->step);
        if (start_step > total_steps) throw UsageError("train: resume step beyond total_steps");
    }

    Rng loop_rng(mix_seed(cfg.seed, 0x700));  // checkpointed for state continuity
    if (resume && !resume->rng_state.empty()) loop_rng.restore_state(resume->rng_state);

    int cached_epoch = -1;
    std::vector<std::size_t> order;
    for (int step = start_step; step < total_steps; ++step) {
        int epoch = step / steps_per_epoch;
        int pos = step % steps_per_epoch;
        if (epoch != cached_epoch) {
            order = epoch_order(epoch);
            cached_epoch = epoch;
        }
        std::size_t lo = static_cast<std::size_t>(pos) * static_cast<std::size_t>(cfg.batch_size);
        std::size_t hi = std::min(data.size(), lo + static_cast<std::size_t>(cfg.batch_size));
        std::vector<std::size_t> batch_idx(order.begin() + static_cast<std::ptrdiff_t>(lo),
                                           order.begin() + static_cast<std::ptrdiff_t>(hi));
        Batch batch = prep.batch_of(batch_idx);

        bundle.zero_grads();
        ForwardCtx ctx;
        ctx.training = true;
        ctx.dropout_seed = mix_seed(cfg.seed, 0xD60 + static_cast<std::uint64_t>(step));
        Tensor<T> loss = nll_step(batch, bundle, ctx);
        double loss_value = static_cast<double>(loss.item());
        if (!is_finite_value(loss_value))
            throw NumericError("train: non-finite loss at step " + std::to_string(step));
        loss.backward();

        clip_grad_norm(trainables, cfg.grad_clip_norm);
        double lr = lr_at(step + 1, total_steps, cfg);
        adamw_step(trainables, result.adam, hyper, lr);
        result.curve.push_back({step, lr, loss_value});
        result.final_step = step + 1;

        bool halting = io.halt_after_step > 0 && step + 1 >= io.halt_after_step;
        bool checkpoint_now = !io.checkpoint_path.empty() &&
                              ((cfg.checkpoint_every > 0 && (step + 1) % cfg.checkpoint_every == 0) ||
                               step + 1 == total_steps || halting);
        if (checkpoint_now) {
            CheckpointExtras<T> extras;
            extras.step = step + 1;
            extras.rng_state = loop_rng.serialize_state();
            extras.optimizer = &result.adam;
            save_checkpoint(bundle, io.checkpoint_path, extras);
        }
        if (halting) break;
    }

    if (!io.losses_csv_path.empty()) write_loss_csv(result.curve, io.losses_csv_path);
    return result;
}

// Orchestrates the optional two-stage curriculum: projector-only first, then
// everything under the configured freeze mask. Plain single-stage otherwise.
template <typename T>
TrainResult<T> train_run(const TrainConfig& cfg, const std::vector<Sample>& data,
                         ModelBundle<T>& bundle, const CollateConfig& ccfg,
                         const TrainIo& io = {}) {
    if (!cfg.two_stage) return train(cfg, data, bundle, ccfg, io);

    FreezeConfig final_freeze = bundle.freeze;
    TrainConfig stage_cfg = cfg;
    stage_cfg.two_stage = false;

    bundle.freeze = FreezeConfig{false, true, false};  // stage 1: projector only
    stage_cfg.seed = mix_seed(cfg.seed, 1);
    TrainIo quiet;  // intermediate stage keeps no artifacts
    TrainResult<T> stage1 = train(stage_cfg, data, bundle, ccfg, quiet);

    bundle.freeze = final_freeze;  // stage 2: everything the caller asked for
    stage_cfg.seed = mix_seed(cfg.seed, 2);
    TrainResult<T> stage2 = train(stage_cfg, data, bundle, ccfg, io);

    // Stage-2 rows renumbered to follow stage 1.
    TrainResult<T> combined;
    combined.adam = std::move(stage2.adam);
    combined.curve = std::move(stage1.curve);
    int offset = static_cast<int>(combined.curve.size());
    for (auto row : stage2.curve) {
        row.step += offset;
        combined.curve.push_back(row);
    }
    combined.final_step = offset + stage2.final_step;
    if (!io.losses_csv_path.empty()) write_loss_csv(combined.curve, io.losses_csv_path);
    return combined;
}

}  // namespace alm
