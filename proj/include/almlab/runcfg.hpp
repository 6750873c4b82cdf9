// Copyright (c) 2026 almlab contributors
// SPDX-License-Identifier: Apache-2.0
//
// Whole-run configuration: JSON file + dotted-key CLI overrides, strict
// schema (unknown keys rejected), resolved snapshot persisted per run, and a
// lockfile making each run directory single-owner.

#pragma once

#include <cstdint>
#include <fcntl.h>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <sys/stat.h>
#include <unistd.h>
#include <vector>

#include <json.hpp>

#include "almlab/config_json.hpp"
#include "almlab/lora.hpp"

namespace alm {

struct RunConfig {
    EncoderConfig encoder;
    ConnectorConfig connector;
    LmConfig lm;
    std::optional<LoraConfig> lora;
    FreezeConfig freeze;
    TrainConfig train;
    GenerationConfig generate;
    CollateConfig data;
    std::vector<std::string> train_manifests;
    std::string eval_manifest;
    std::uint64_t seed = 0;

    static RunConfig from_json(const nlohmann::json& j) {
        cfgjson::reject_unknown(j,
                                {"encoder", "connector", "lm", "lora", "freeze", "train",
                                 "generate", "data", "train_manifests", "eval_manifest", "seed"},
                                "config");
        RunConfig c;
        if (j.contains("encoder")) c.encoder = encoder_config_from_json(j.at("encoder"));
        if (j.contains("connector")) c.connector = connector_config_from_json(j.at("connector"));
        if (j.contains("lm")) c.lm = lm_config_from_json(j.at("lm"));
        if (j.contains("lora") && !j.at("lora").is_null())
            c.lora = lora_config_from_json(j.at("lora"));
        if (j.contains("freeze")) c.freeze = freeze_config_from_json(j.at("freeze"));
        if (j.contains("train")) c.train = train_config_from_json(j.at("train"));
        if (j.contains("generate")) c.generate = generation_config_from_json(j.at("generate"));
        if (j.contains("data")) c.data = collate_config_from_json(j.at("data"));
        if (j.contains("train_manifests"))
            c.train_manifests = j.at("train_manifests").get<std::vector<std::string>>();
        if (j.contains("eval_manifest")) c.eval_manifest = j.at("eval_manifest").get<std::string>();
        c.seed = j.value("seed", c.seed);
        if (c.connector.d_in != c.encoder.d_model)
            throw UsageError("config: connector.d_in must equal encoder.d_model");
        if (c.connector.d_lm != c.lm.d_lm)
            throw UsageError("config: connector.d_lm must equal lm.d_lm");
        if (c.data.n_mels != c.encoder.n_mels)
            throw UsageError("config: data.n_mels must equal encoder.n_mels");
        return c;
    }

    nlohmann::json to_json() const {
        return {{"encoder", alm::to_json(encoder)},
                {"connector", alm::to_json(connector)},
                {"lm", alm::to_json(lm)},
                {"lora", lora ? alm::to_json(*lora) : nlohmann::json(nullptr)},
                {"freeze", alm::to_json(freeze)},
                {"train", alm::to_json(train)},
                {"generate", alm::to_json(generate)},
                {"data", alm::to_json(data)},
                {"train_manifests", train_manifests},
                {"eval_manifest", eval_manifest},
                {"seed", seed}};
    }

    template <typename T>
    ModelBundle<T> build_bundle() const {
        ModelBundle<T> bundle = ModelBundle<T>::init(encoder, connector, lm, seed);
        if (lora) attach_lora(bundle, *lora, seed);
        bundle.freeze = freeze;
        set_trainable(bundle, freeze);
        return bundle;
    }
};

inline nlohmann::json load_json_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError("config: cannot open " + path);
    nlohmann::json j = nlohmann::json::parse(is, nullptr, false);
    if (j.is_discarded()) throw UsageError("config: invalid JSON in " + path);
    return j;
}

// "a.b.c=value" with the value parsed as JSON when possible, else a string.
inline void apply_override(nlohmann::json& j, const std::string& assignment) {
    std::size_t eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw UsageError("override must look like key.path=value: " + assignment);
    std::string path = assignment.substr(0, eq);
    std::string value_text = assignment.substr(eq + 1);
    nlohmann::json value = nlohmann::json::parse(value_text, nullptr, false);
    if (value.is_discarded()) value = value_text;

    nlohmann::json* cursor = &j;
    std::size_t start = 0;
    for (;;) {
        std::size_t dot = path.find('.', start);
        std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
        if (key.empty()) throw UsageError("override has an empty path segment: " + assignment);
        if (dot == std::string::npos) {
            (*cursor)[key] = value;
            return;
        }
        cursor = &(*cursor)[key];
        start = dot + 1;
    }
}

inline void write_resolved_config(const nlohmann::json& resolved, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    std::ofstream os(out_dir + "/config.json");
    if (!os) throw DataError("config: cannot write " + out_dir + "/config.json");
    os << resolved.dump(2) << "\n";
}

// One process owns a run directory for its lifetime.
class RunLock {
public:
    explicit RunLock(const std::string& out_dir) : path_(out_dir + "/.lock") {
        std::filesystem::create_directories(out_dir);
        int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd < 0)
            throw DataError("run directory is locked by another process (remove " + path_ +
                            " if stale)");
        std::string pid = std::to_string(::getpid()) + "\n";
        ssize_t written = ::write(fd, pid.data(), pid.size());
        (void)written;
        ::close(fd);
    }

    ~RunLock() { ::unlink(path_.c_str()); }

    RunLock(const RunLock&) = delete;
    RunLock& operator=(const RunLock&) = delete;

private:
    std::string path_;
};

}  // namespace alm
