// Copyright (c) 2026 almlab contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <vector>

#include "almlab/bundle.hpp"
#include "almlab/rng.hpp"
#include "almlab/tensor.hpp"

namespace testutil {

template <typename T>
double max_abs_diff(const std::vector<T>& a, const std::vector<T>& b) {
    REQUIRE(a.size() == b.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        worst = std::max(worst, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
    return worst;
}

template <typename T>
alm::Tensor<T> random_tensor(std::vector<alm::Index> shape, std::uint64_t seed, T stddev = T(1),
                             bool requires_grad = false) {
    alm::Rng rng(seed);
    return alm::Tensor<T>::randn(std::move(shape), rng, stddev, requires_grad);
}

// Small bundle used across tests: encoder 2x32 heads 2, LM 2x64 heads 2.
inline alm::ModelBundle<float> toy_bundle(std::uint64_t seed = 0, int max_frames = 400,
                                          int max_seq_len = 512, int n_mels = 80) {
    alm::EncoderConfig ec;
    ec.n_layers = 2;
    ec.d_model = 32;
    ec.n_heads = 2;
    ec.n_mels = n_mels;
    ec.max_frames = max_frames;
    alm::ConnectorConfig cc;
    cc.d_in = 32;
    cc.d_lm = 64;
    alm::LmConfig lc;
    lc.d_lm = 64;
    lc.n_layers = 2;
    lc.n_heads = 2;
    lc.max_seq_len = max_seq_len;
    return alm::ModelBundle<float>::init(ec, cc, lc, seed);
}

}  // namespace testutil
