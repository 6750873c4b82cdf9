// Copyright (c) 2026 almlab contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "almlab/common.hpp"

namespace alm {

struct TrainConfig {
    int epochs = 1;
    double lr_max = 2e-4;
    double warmup_ratio = 0.01;
    double weight_decay = 0.01;
    double grad_clip_norm = 1.0;
    int batch_size = 8;
    std::uint64_t seed = 0;
    std::string schedule = "cosine";
    int checkpoint_every = 0;  // steps; 0 = final checkpoint only
    bool two_stage = false;    // projector-only first half, everything second half

    void validate() const {
        if (epochs < 1) throw UsageError("train: epochs must be >= 1");
        if (lr_max <= 0) throw UsageError("train: lr_max must be positive");
        if (warmup_ratio < 0 || warmup_ratio >= 1)
            throw UsageError("train: warmup_ratio must be in [0,1)");
        if (weight_decay < 0) throw UsageError("train: weight_decay must be >= 0");
        if (grad_clip_norm <= 0) throw UsageError("train: grad_clip_norm must be positive");
        if (batch_size < 1) throw UsageError("train: batch_size must be >= 1");
        if (schedule != "cosine") throw UsageError("train: only the cosine schedule is supported");
        if (checkpoint_every < 0) throw UsageError("train: checkpoint_every must be >= 0");
    }
};

// Linear warmup from 0 to lr_max over ceil(warmup_ratio * total) steps, then
// cosine decay to 0 at total_steps.
inline double lr_at(int step, int total_steps, const TrainConfig& cfg) {
    if (step < 0 || step > total_steps) throw UsageError("lr_at: step out of [0, total_steps]");
    if (total_steps < 1) throw UsageError("lr_at: total_steps must be >= 1");
    int warmup = static_cast<int>(std::ceil(cfg.warmup_ratio * total_steps));
    if (step <= warmup && warmup > 0)
        return cfg.lr_max * static_cast<double>(step) / static_cast<double>(warmup);
    if (total_steps == warmup) return cfg.lr_max;
    double progress = static_cast<double>(step - warmup) / static_cast<double>(total_steps - warmup);
    return cfg.lr_max * 0.5 * (1.0 + std::cos(3.14159265358979323846 * progress));
}

}  // namespace alm
