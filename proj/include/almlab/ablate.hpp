// Copyright (c) 2026 almlab contributors
// SPDX-License-Identifier: Apache-2.0
//
// Ablation grid: each variant changes one dimension of the base run config
// (sequence reduction, layer aggregation, freeze grid, training stages),
// trains from a fresh seeded init, evaluates self-set multiple-choice
// accuracy, and reports per-domain deltas against the base run.

#pragma once

#include <filesystem>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "almlab/harness.hpp"
#include "almlab/runcfg.hpp"
#include "almlab/train.hpp"

namespace alm {

struct AblateVariant {
    std::string dimension;
    std::string name;
    std::function<void(RunConfig&)> mutate;
};

inline std::vector<AblateVariant> ablation_grid(const std::set<std::string>& dims) {
    auto want = [&](const std::string& d) { return dims.empty() || dims.count(d); };
    std::vector<AblateVariant> grid;
    if (want("stack"))
        for (int k : {1, 2, 4, 8})
            grid.push_back({"stack", "k=" + std::to_string(k), [k](RunConfig& c) {
                                c.connector.reduction = Reduce::Stack;
                                c.connector.k = k;
                            }});
    if (want("layer_agg"))
        for (auto position : {AggPosition::Before, AggPosition::After})
            for (int every : {3, 6, 12}) {
                std::string name = std::string(position == AggPosition::Before ? "before" : "after") +
                                   "_every" + std::to_string(every);
                grid.push_back({"layer_agg", name, [position, every](RunConfig& c) {
                                    c.connector.layer_agg = true;
                                    c.connector.agg_every = every;
                                    c.connector.agg_position = position;
                                }});
            }
    if (want("freeze")) {
        grid.push_back({"freeze", "frozen_encoder",
                        [](RunConfig& c) { c.freeze = FreezeConfig{false, true, true}; }});
        grid.push_back({"freeze", "frozen_encoder_and_lm",
                        [](RunConfig& c) { c.freeze = FreezeConfig{false, true, false}; }});
        grid.push_back({"freeze", "frozen_lm",
                        [](RunConfig& c) { c.freeze = FreezeConfig{true, true, false}; }});
    }
    if (want("stages"))
        grid.push_back({"stages", "two_stage", [](RunConfig& c) { c.train.two_stage = true; }});
    return grid;
}

struct AblateRow {
    std::string dimension;
    std::string name;
    AccuracyReport absolute;
    double d_total = 0.0, d_sound = 0.0, d_music = 0.0, d_speech = 0.0;
};

struct AblateSummary {
    AccuracyReport base;
    std::vector<AblateRow> rows;

    nlohmann::json to_json() const {
        nlohmann::json variants = nlohmann::json::array();
        for (const auto& row : rows)
            variants.push_back({{"dimension", row.dimension},
                                {"variant", row.name},
                                {"absolute", row.absolute.to_json()},
                                {"delta_total", row.d_total},
                                {"delta_sound", row.d_sound},
                                {"delta_music", row.d_music},
                                {"delta_speech", row.d_speech}});
        return {{"base", base.to_json()}, {"variants", variants}};
    }

    std::string to_table() const {
        auto domain = [](const AccuracyReport& r, const char* name) {
            auto it = r.per_domain.find(name);
            return it == r.per_domain.end() ? 0.0 : it->second.accuracy();
        };
        char line[160];
        std::string out;
        std::snprintf(line, sizeof(line), "%-32s %8s %8s %8s %8s\n", "variant", "total", "sound",
                      "music", "speech");
        out += line;
        std::snprintf(line, sizeof(line), "%-32s %8.1f %8.1f %8.1f %8.1f\n", "base (absolute)",
                      base.micro, domain(base, "sound"), domain(base, "music"),
                      domain(base, "speech"));
        out += line;
        for (const auto& row : rows) {
            std::string label = row.dimension + ": " + row.name;
            std::snprintf(line, sizeof(line), "%-32s %+8.1f %+8.1f %+8.1f %+8.1f\n", label.c_str(),
                          row.d_total, row.d_sound, row.d_music, row.d_speech);
            out += line;
        }
        return out;
    }
};

// Trains and evaluates one configuration end to end.
template <typename T>
AccuracyReport ablate_one(const RunConfig& cfg, const std::vector<Sample>& train_data,
                          const std::vector<Sample>& eval_data, const std::string& run_dir) {
    std::filesystem::create_directories(run_dir);
    write_resolved_config(cfg.to_json(), run_dir);
    ModelBundle<T> bundle = cfg.build_bundle<T>();
    TrainIo io;
    io.losses_csv_path = run_dir + "/losses.csv";
    train_run(cfg.train, train_data, bundle, cfg.data, io);
    McEvalResult<T> eval = run_mc_eval(bundle, eval_data, cfg.generate, cfg.data);
    std::ofstream os(run_dir + "/report.json");
    os << dump_json(eval.to_json(), 2) << "\n";
    return eval.report;
}

// "--grid stack" selects a whole dimension; "--grid stack=2,8" narrows it to
// the named variants.
inline std::vector<AblateVariant> parse_grid_args(const std::vector<std::string>& args) {
    static const std::set<std::string> known = {"stack", "layer_agg", "freeze", "stages"};
    if (args.empty()) return ablation_grid({});
    std::vector<AblateVariant> grid;
    for (const auto& arg : args) {
        std::size_t eq = arg.find('=');
        std::string dim = arg.substr(0, eq);
        if (!known.count(dim)) throw UsageError("ablate: unknown grid dimension '" + dim + "'");
        auto all = ablation_grid({dim});
        if (eq == std::string::npos) {
            grid.insert(grid.end(), all.begin(), all.end());
            continue;
        }
        std::string values = arg.substr(eq + 1);
        std::size_t start = 0;
        while (start <= values.size()) {
            std::size_t comma = values.find(',', start);
            std::string token = values.substr(
                start, comma == std::string::npos ? comma : comma - start);
            bool found = false;
            for (const auto& variant : all)
                if (variant.name == token || variant.name == "k=" + token) {
                    grid.push_back(variant);
                    found = true;
                }
            if (!found)
                throw UsageError("ablate: no variant '" + token + "' in dimension '" + dim + "'");
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
    }
    return grid;
}

template <typename T>
AblateSummary run_ablation(const RunConfig& base, const std::vector<AblateVariant>& grid,
                           const std::vector<Sample>& train_data,
                           const std::vector<Sample>& eval_data, const std::string& out_dir,
                           const std::function<void(const std::string&)>& progress = {}) {
    if (grid.empty()) throw UsageError("ablate: no grid variants selected");

    AblateSummary summary;
    if (progress) progress("base");
    summary.base = ablate_one<T>(base, train_data, eval_data, out_dir + "/base");

    auto domain = [](const AccuracyReport& r, const char* name) {
        auto it = r.per_domain.find(name);
        return it == r.per_domain.end() ? 0.0 : it->second.accuracy();
    };
    for (const auto& variant : grid) {
        RunConfig cfg = base;
        variant.mutate(cfg);
        std::string run_dir = out_dir + "/" + variant.dimension + "__" + variant.name;
        if (progress) progress(variant.dimension + ": " + variant.name);
        AblateRow row;
        row.dimension = variant.dimension;
        row.name = variant.name;
        row.absolute = ablate_one<T>(cfg, train_data, eval_data, run_dir);
        row.d_total = row.absolute.micro - summary.base.micro;
        row.d_sound = domain(row.absolute, "sound") - domain(summary.base, "sound");
        row.d_music = domain(row.absolute, "music") - domain(summary.base, "music");
        row.d_speech = domain(row.absolute, "speech") - domain(summary.base, "speech");
        summary.rows.push_back(std::move(row));
    }
    return summary;
}

}  // namespace alm
