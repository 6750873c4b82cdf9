// Copyright (c) 2026 almlab contributors
// SPDX-License-Identifier: Apache-2.0
//
// Binary checkpoint: magic, format version, length-prefixed canonical JSON
// config snapshot, then per-tensor records (name, dtype tag, shape,
// little-endian payload). Round-trips bit-exactly; a version mismatch is an
// error and nothing is loaded partially.

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "almlab/config_json.hpp"
#include "almlab/lora.hpp"
#include "almlab/optim.hpp"

namespace alm {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads are little-endian; big-endian hosts are unsupported");

inline constexpr char kCheckpointMagic[8] = {'A', 'L', 'M', 'L', 'A', 'B', 'C', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace ckpt_detail {

template <typename V>
void write_pod(std::ostream& os, V v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <typename V>
V read_pod(std::istream& is) {
    V v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(V));
    if (!is) throw DataError("checkpoint: truncated file");
    return v;
}

template <typename T>
constexpr std::uint8_t dtype_tag() {
    return std::is_same_v<T, float> ? 0 : 1;
}

template <typename T>
void write_tensor(std::ostream& os, const std::string& name, const Tensor<T>& t) {
    if (name.size() > 0xffff) throw UsageError("checkpoint: tensor name too long");
    write_pod<std::uint16_t>(os, static_cast<std::uint16_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod<std::uint8_t>(os, dtype_tag<T>());
    write_pod<std::uint8_t>(os, static_cast<std::uint8_t>(t.ndim()));
    for (Index d : t.shape()) write_pod<std::uint64_t>(os, d);
    os.write(reinterpret_cast<const char*>(t.data().data()),
             static_cast<std::streamsize>(t.numel() * sizeof(T)));
}

struct RawTensor {
    std::vector<Index> shape;
    std::vector<char> bytes;
    std::uint8_t dtype = 0;
};

inline std::pair<std::string, RawTensor> read_tensor(std::istream& is) {
    auto name_len = read_pod<std::uint16_t>(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    RawTensor raw;
    raw.dtype = read_pod<std::uint8_t>(is);
    auto ndim = read_pod<std::uint8_t>(is);
    Index numel = 1;
    for (int d = 0; d < ndim; ++d) {
        raw.shape.push_back(static_cast<Index>(read_pod<std::uint64_t>(is)));
        numel *= raw.shape.back();
    }
    std::size_t elem = raw.dtype == 0 ? sizeof(float) : sizeof(double);
    raw.bytes.resize(numel * elem);
    is.read(raw.bytes.data(), static_cast<std::streamsize>(raw.bytes.size()));
    if (!is) throw DataError("checkpoint: truncated tensor record for '" + name + "'");
    return {std::move(name), std::move(raw)};
}

}  // namespace ckpt_detail

template <typename T>
struct CheckpointExtras {
    std::int64_t step = 0;
    std::string rng_state;
    const AdamState<T>* optimizer = nullptr;  // optional
};

template <typename T>
void save_checkpoint(ModelBundle<T>& bundle, const std::string& path,
                     const CheckpointExtras<T>& extras = {}) {
    nlohmann::json meta;
    meta["format_version"] = kCheckpointVersion;
    meta["encoder"] = to_json(bundle.enc_cfg);
    meta["connector"] = to_json(bundle.conn_cfg);
    meta["lm"] = to_json(bundle.lm_cfg);
    meta["lora"] = bundle.lora_cfg ? to_json(*bundle.lora_cfg) : nlohmann::json(nullptr);
    meta["freeze"] = to_json(bundle.freeze);
    meta["step"] = extras.step;
    meta["rng_state"] = extras.rng_state;
    meta["has_optimizer"] = extras.optimizer != nullptr;
    meta["adam_step"] = extras.optimizer ? extras.optimizer->t : 0;
    std::string json_text = meta.dump();  // nlohmann orders keys canonically

    std::uint64_t n_tensors = 0;
    bundle.for_each_param([&](const std::string&, Tensor<T>&) { ++n_tensors; });
    if (extras.optimizer) n_tensors += 2 * extras.optimizer->m.size();

    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("checkpoint: cannot write " + path);
    os.write(kCheckpointMagic, 8);
    ckpt_detail::write_pod<std::uint32_t>(os, kCheckpointVersion);
    ckpt_detail::write_pod<std::uint64_t>(os, json_text.size());
    os.write(json_text.data(), static_cast<std::streamsize>(json_text.size()));
    ckpt_detail::write_pod<std::uint64_t>(os, n_tensors);
    bundle.for_each_param([&](const std::string& name, Tensor<T>& t) {
        ckpt_detail::write_tensor(os, name, t);
    });
    if (extras.optimizer) {
        for (const auto& [name, m] : extras.optimizer->m) {
            auto t = Tensor<T>::from({m.size()}, m);
            ckpt_detail::write_tensor(os, "optim.m." + name, t);
        }
        for (const auto& [name, v] : extras.optimizer->v) {
            auto t = Tensor<T>::from({v.size()}, v);
            ckpt_detail::write_tensor(os, "optim.v." + name, t);
        }
    }
    if (!os) throw DataError("checkpoint: write failed for " + path);
}

template <typename T>
struct LoadedCheckpoint {
    ModelBundle<T> bundle;
    std::int64_t step = 0;
    std::string rng_state;
    std::optional<AdamState<T>> optimizer;
};

// Reads only the JSON header; used by `inspect-checkpoint`.
inline nlohmann::json read_checkpoint_meta(std::istream& is) {
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kCheckpointMagic, 8) != 0)
        throw DataError("checkpoint: bad magic bytes");
    auto version = ckpt_detail::read_pod<std::uint32_t>(is);
    if (version != kCheckpointVersion)
        throw DataError("checkpoint: format version " + std::to_string(version) +
                        " != supported " + std::to_string(kCheckpointVersion));
    auto json_len = ckpt_detail::read_pod<std::uint64_t>(is);
    std::string json_text(json_len, '\0');
    is.read(json_text.data(), static_cast<std::streamsize>(json_len));
    if (!is) throw DataError("checkpoint: truncated config");
    try {
        return nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("checkpoint: bad config JSON (") + e.what() + ")");
    }
}

template <typename T>
LoadedCheckpoint<T> load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("checkpoint: cannot open " + path);
    nlohmann::json meta = read_checkpoint_meta(is);

    auto n_tensors = ckpt_detail::read_pod<std::uint64_t>(is);
    std::map<std::string, ckpt_detail::RawTensor> records;
    for (std::uint64_t i = 0; i < n_tensors; ++i) {
        auto [name, raw] = ckpt_detail::read_tensor(is);
        if (!records.emplace(std::move(name), std::move(raw)).second)
            throw DataError("checkpoint: duplicate tensor name");
    }

    LoadedCheckpoint<T> out;
    out.bundle = ModelBundle<T>::init(encoder_config_from_json(meta.at("encoder")),
                                      connector_config_from_json(meta.at("connector")),
                                      lm_config_from_json(meta.at("lm")), /*seed=*/0);
    if (!meta.at("lora").is_null())
        attach_lora(out.bundle, lora_config_from_json(meta.at("lora")));
    out.step = meta.value("step", std::int64_t{0});
    out.rng_state = meta.value("rng_state", std::string{});

    auto fill = [&](const std::string& name, std::vector<T>& dst,
                    const std::vector<Index>* expect_shape) {
        auto it = records.find(name);
        if (it == records.end()) throw DataError("checkpoint: missing tensor '" + name + "'");
        const auto& raw = it->second;
        if (raw.dtype != ckpt_detail::dtype_tag<T>())
            throw DataError("checkpoint: dtype mismatch for '" + name + "'");
        if (expect_shape && raw.shape != *expect_shape)
            throw DataError("checkpoint: shape mismatch for '" + name + "'");
        std::size_t n = raw.bytes.size() / sizeof(T);
        dst.resize(n);
        std::memcpy(dst.data(), raw.bytes.data(), raw.bytes.size());
    };

    std::size_t model_tensors = 0;
    out.bundle.for_each_param([&](const std::string& name, Tensor<T>& t) {
        fill(name, t.data(), &t.shape());
        ++model_tensors;
    });
    out.bundle.freeze = freeze_config_from_json(meta.at("freeze"));
    set_trainable(out.bundle, out.bundle.freeze);

    std::size_t consumed = model_tensors;
    if (meta.value("has_optimizer", false)) {
        AdamState<T> state;
        state.t = meta.value("adam_step", std::int64_t{0});
        for (const auto& [name, raw] : records) {
            if (name.rfind("optim.m.", 0) == 0) {
                fill(name, state.m[name.substr(8)], nullptr);
                ++consumed;
            } else if (name.rfind("optim.v.", 0) == 0) {
                fill(name, state.v[name.substr(8)], nullptr);
                ++consumed;
            }
        }
        out.optimizer = std::move(state);
    }
    if (records.size() != consumed)
        throw DataError("checkpoint: unexpected extra tensor records");
    return out;
}

}  // namespace alm
