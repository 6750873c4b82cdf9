// Copyright (c) 2026 almlab contributors
// SPDX-License-Identifier: Apache-2.0
//
// Central finite-difference verification of reverse-mode gradients. Works on
// named double-precision parameter tensors; the function under test rebuilds
// its graph from the current parameter values on every call.

#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "almlab/rng.hpp"
#include "almlab/tensor.hpp"

namespace alm {

struct GradCheckOptions {
    double tolerance = 1e-4;
    double step = 1e-5;
    // Coordinates checked per parameter tensor; large tensors are sampled.
    std::size_t max_entries_per_param = std::numeric_limits<std::size_t>::max();
    std::uint64_t seed = 0;
};

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::map<std::string, double> per_parameter_errors;
    bool passed = false;
};

using ScalarFn = std::function<Tensor<double>()>;
using NamedParams = std::vector<std::pair<std::string, Tensor<double>>>;

inline double rel_error(double analytic, double numeric) {
    double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    return std::abs(analytic - numeric) / denom;
}

inline GradCheckReport grad_check(const ScalarFn& fn, const NamedParams& params,
                                  const GradCheckOptions& opt = {}) {
    for (const auto& [name, p] : params)
        if (!p.requires_grad())
            throw UsageError("grad_check: parameter '" + name + "' does not require grad");

    Tensor<double> loss = fn();
    if (loss.numel() != 1) throw UsageError("grad_check: fn must return a scalar");
    if (!is_finite_value(loss.item()))
        throw NumericError("grad_check: non-finite loss at evaluation point");
    for (const auto& [name, p] : params) p.node()->grad.clear();
    loss.backward();

    // Snapshot analytic gradients before perturbing anything.
    std::map<std::string, std::vector<double>> analytic;
    for (const auto& [name, p] : params) analytic[name] = p.grad();

    auto eval = [&]() {
        NoGradGuard ng;
        Tensor<double> l = fn();
        double v = l.item();
        if (!is_finite_value(v))
            throw NumericError("grad_check: non-finite loss during finite differences");
        return v;
    };

    GradCheckReport report;
    for (const auto& [name, p] : params) {
        auto& values = const_cast<Tensor<double>&>(p).data();
        std::vector<std::size_t> coords;
        if (values.size() <= opt.max_entries_per_param) {
            coords.resize(values.size());
            for (std::size_t i = 0; i < values.size(); ++i) coords[i] = i;
        } else {
            Rng rng(mix_seed(opt.seed, std::hash<std::string>{}(name)));
            std::vector<std::size_t> all(values.size());
            for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
            rng.shuffle(all);
            coords.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(opt.max_entries_per_param));
        }

        double worst = 0.0;
        for (std::size_t i : coords) {
            double saved = values[i];
            values[i] = saved + opt.step;
            double f_plus = eval();
            values[i] = saved - opt.step;
            double f_minus = eval();
            values[i] = saved;
            double numeric = (f_plus - f_minus) / (2.0 * opt.step);
            // Central differences cannot resolve differences below their own
            // cancellation noise; a genuinely wrong gradient shows up orders
            // of magnitude above this bound.
            double noise = 8.0 * std::numeric_limits<double>::epsilon() *
                           std::max(std::abs(f_plus), std::abs(f_minus)) / opt.step;
            if (std::abs(analytic[name][i] - numeric) <= noise) continue;
            worst = std::max(worst, rel_error(analytic[name][i], numeric));
        }
        report.per_parameter_errors[name] = worst;
        report.max_rel_error = std::max(report.max_rel_error, worst);
    }
    report.passed = report.max_rel_error <= opt.tolerance;
    return report;
}

}  // namespace alm
