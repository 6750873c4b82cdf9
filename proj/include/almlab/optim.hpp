// Copyright (c) 2026 almlab contributors
// SPDX-License-Identifier: Apache-2.0
//
// AdamW with decoupled weight decay. Decay applies to 2-D weight matrices
// only; gains and biases (1-D tensors) are exempt. Gradient clipping scales
// by the global norm across the whole trainable set.

#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "almlab/tensor.hpp"

namespace alm {

template <typename T>
struct AdamState {
    std::int64_t t = 0;  // completed optimizer steps
    std::map<std::string, std::vector<T>> m, v;
};

struct AdamHyper {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

// Value handles: copies alias the underlying parameter storage.
template <typename T>
using NamedTensors = std::vector<std::pair<std::string, Tensor<T>>>;

// Returns the pre-clip global gradient norm.
template <typename T>
double clip_grad_norm(NamedTensors<T>& params, double max_norm) {
    double total = 0.0;
    for (auto& [name, p] : params)
        for (T g : p.grad()) total += static_cast<double>(g) * static_cast<double>(g);
    double norm = std::sqrt(total);
    if (norm > max_norm && norm > 0.0) {
        T scale_by = static_cast<T>(max_norm / norm);
        for (auto& [name, p] : params)
            for (T& g : p.grad()) g *= scale_by;
    }
    return norm;
}

template <typename T>
void adamw_step(NamedTensors<T>& params, AdamState<T>& state, const AdamHyper& hyper, double lr) {
    state.t += 1;
    double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.t));
    double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.t));
    for (auto& [name, p] : params) {
        auto& m = state.m[name];
        auto& v = state.v[name];
        if (m.size() != p.numel()) m.assign(p.numel(), T(0));
        if (v.size() != p.numel()) v.assign(p.numel(), T(0));
        auto& w = p.data();
        const auto& g = p.grad();
        bool decay = p.ndim() >= 2 && hyper.weight_decay > 0.0;
        for (Index i = 0; i < w.size(); ++i) {
            double gi = static_cast<double>(g[i]);
            double mi = hyper.beta1 * static_cast<double>(m[i]) + (1.0 - hyper.beta1) * gi;
            double vi = hyper.beta2 * static_cast<double>(v[i]) + (1.0 - hyper.beta2) * gi * gi;
            m[i] = static_cast<T>(mi);
            v[i] = static_cast<T>(vi);
            double update = (mi / bc1) / (std::sqrt(vi / bc2) + hyper.eps);
            double wi = static_cast<double>(w[i]);
            if (decay) wi -= lr * hyper.weight_decay * wi;
            w[i] = static_cast<T>(wi - lr * update);
        }
    }
}

}  // namespace alm
