// Copyright (c) 2026 almlab contributors
// SPDX-License-Identifier: Apache-2.0
//
// Byte-level tokenizer: ids 0..255 are raw bytes, followed by named special
// tokens. Special markers never appear inside byte-encoded text, so decoding
// is exact.

#pragma once

#include <map>
#include <string>
#include <vector>

#include "almlab/common.hpp"

namespace alm {

struct Tokenizer {
    static constexpr int kPad = 256;
    static constexpr int kBos = 257;
    static constexpr int kEos = 258;
    static constexpr int kAudio = 259;
    static constexpr int kSystem = 260;
    static constexpr int kUser = 261;
    static constexpr int kAssistant = 262;
    static constexpr int kVocabSize = 263;

    static const std::map<std::string, int>& specials() {
        static const std::map<std::string, int> table = {
            {"<|pad|>", kPad},       {"<|bos|>", kBos},
            {"<|eos|>", kEos},       {"<|AUDIO|>", kAudio},
            {"<|system|>", kSystem}, {"<|user|>", kUser},
            {"<|assistant|>", kAssistant},
        };
        return table;
    }

    static int special_id(const std::string& name) {
        auto it = specials().find(name);
        if (it == specials().end()) throw UsageError("tokenizer: unknown special token " + name);
        return it->second;
    }

    std::vector<int> encode_bytes(const std::string& text) const {
        std::vector<int> ids;
        ids.reserve(text.size());
        for (unsigned char c : text) ids.push_back(static_cast<int>(c));
        return ids;
    }

    std::string decode(const std::vector<int>& ids) const {
        std::string out;
        for (int id : ids) {
            if (id >= 0 && id < 256) {
                out.push_back(static_cast<char>(id));
                continue;
            }
            bool found = false;
            for (const auto& [name, sid] : specials())
                if (sid == id) {
                    out += name;
                    found = true;
                    break;
                }
            if (!found) throw DataError("tokenizer: cannot decode id " + std::to_string(id));
        }
        return out;
    }

    // Decode dropping special tokens; used for model output text.
    std::string decode_text(const std::vector<int>& ids) const {
        std::string out;
        for (int id : ids)
            if (id >= 0 && id < 256) out.push_back(static_cast<char>(id));
        return out;
    }
};

}  // namespace alm
