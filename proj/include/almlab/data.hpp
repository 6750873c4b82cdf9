// Copyright (c) 2026 almlab contributors
// SPDX-License-Identifier: Apache-2.0
//
// JSONL manifest ingestion, chat-style prompt rendering around the audio
// placeholder, and batch collation (audio padded to a fixed length, token
// rows right-padded to the batch longest, padding masked out of loss and
// attention).

#pragma once

#include <array>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "almlab/audio.hpp"
#include "almlab/common.hpp"
#include "almlab/lm.hpp"
#include "almlab/mel.hpp"
#include "almlab/tokenizer.hpp"

namespace alm {

inline constexpr const char* kAudioPlaceholder = "<|AUDIO|>";

// dump that survives model-generated byte strings (invalid UTF-8 is replaced)
inline std::string dump_json(const nlohmann::json& j, int indent = -1) {
    return j.dump(indent, ' ', false, nlohmann::json::error_handler_t::replace);
}

inline std::size_t count_placeholders(const std::string& text) {
    std::size_t count = 0;
    for (std::size_t pos = text.find(kAudioPlaceholder); pos != std::string::npos;
         pos = text.find(kAudioPlaceholder, pos + 1))
        ++count;
    return count;
}

struct Sample {
    std::string id;
    nlohmann::json audio;  // WAV path (string) or inline synthetic spec (object)
    std::string prompt;    // contains exactly one <|AUDIO|>
    std::string completion;
    std::optional<std::array<std::string, 4>> choices;
    std::optional<int> answer_index;
    std::string domain;  // sound | music | speech

    void validate() const {
        if (id.empty()) throw DataError("sample: empty id");
        if (count_placeholders(prompt) != 1)
            throw DataError("sample " + id + ": prompt must contain exactly one " +
                            kAudioPlaceholder);
        if (completion.empty()) throw DataError("sample " + id + ": empty completion");
        if (choices.has_value() != answer_index.has_value())
            throw DataError("sample " + id + ": choices and answer_index go together");
        if (answer_index && (*answer_index < 0 || *answer_index >= 4))
            throw DataError("sample " + id + ": answer_index out of [0,4)");
        if (domain != "sound" && domain != "music" && domain != "speech")
            throw DataError("sample " + id + ": domain must be sound|music|speech");
        if (!audio.is_string() && !audio.is_object())
            throw DataError("sample " + id + ": audio must be a path or a spec object");
    }

    nlohmann::json to_json() const {
        nlohmann::json j{{"id", id},
                         {"audio", audio},
                         {"prompt", prompt},
                         {"completion", completion},
                         {"domain", domain}};
        if (choices) {
            j["choices"] = *choices;
            j["answer_index"] = *answer_index;
        }
        return j;
    }

    static Sample from_json(const nlohmann::json& j) {
        if (!j.is_object()) throw DataError("sample: expected a JSON object");
        static const std::set<std::string> allowed = {"id",         "audio",  "prompt",
                                                      "completion", "choices", "answer_index",
                                                      "domain"};
        for (const auto& [key, _] : j.items())
            if (!allowed.count(key)) throw DataError("sample: unknown field '" + key + "'");
        for (const char* key : {"id", "audio", "prompt", "completion", "domain"})
            if (!j.contains(key)) throw DataError(std::string("sample: missing field '") + key + "'");
        Sample s;
        s.id = j.at("id").get<std::string>();
        s.audio = j.at("audio");
        s.prompt = j.at("prompt").get<std::string>();
        s.completion = j.at("completion").get<std::string>();
        s.domain = j.at("domain").get<std::string>();
        if (j.contains("choices")) {
            auto arr = j.at("choices");
            if (!arr.is_array() || arr.size() != 4)
                throw DataError("sample " + s.id + ": choices must be 4 strings");
            std::array<std::string, 4> c;
            for (std::size_t i = 0; i < 4; ++i) c[i] = arr.at(i).get<std::string>();
            s.choices = c;
        }
        if (j.contains("answer_index")) s.answer_index = j.at("answer_index").get<int>();
        s.validate();
        return s;
    }
};

// Strict line-oriented load: any malformed line aborts the whole read with
// its line number. Relative WAV paths are resolved against the manifest's
// directory.
inline std::vector<Sample> load_manifest(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError("manifest: cannot open " + path);
    std::string dir;
    if (std::size_t slash = path.find_last_of('/'); slash != std::string::npos)
        dir = path.substr(0, slash + 1);
    std::vector<Sample> samples;
    std::set<std::string> seen_ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DataError("manifest " + path + " line " + std::to_string(line_no) +
                            ": invalid JSON (" + e.what() + ")");
        }
        try {
            samples.push_back(Sample::from_json(j));
        } catch (const DataError& e) {
            throw DataError("manifest " + path + " line " + std::to_string(line_no) + ": " +
                            e.what());
        } catch (const nlohmann::json::exception& e) {
            throw DataError("manifest " + path + " line " + std::to_string(line_no) +
                            ": bad field type (" + e.what() + ")");
        }
        if (!seen_ids.insert(samples.back().id).second)
            throw DataError("manifest " + path + " line " + std::to_string(line_no) +
                            ": duplicate id '" + samples.back().id + "'");
        Sample& s = samples.back();
        if (!dir.empty() && s.audio.is_string()) {
            std::string p = s.audio.get<std::string>();
            if (!p.empty() && p[0] != '/') s.audio = dir + p;
        }
    }
    return samples;
}

inline void save_manifest(const std::vector<Sample>& samples, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw DataError("manifest: cannot write " + path);
    for (const auto& s : samples) os << s.to_json().dump() << "\n";
}

// ---------------------------------------------------------------------------
// prompt rendering
// ---------------------------------------------------------------------------
//
// Template: <|bos|><|system|>{system}<|user|>{prompt}<|assistant|>{completion}<|eos|>
// where {prompt} carries the single audio placeholder as one token. The loss
// span covers the completion tokens plus the closing <|eos|>.

struct RenderedPrompt {
    std::vector<int> ids;
    std::size_t placeholder_pos = 0;
    CompletionSpan completion;  // empty when rendered for generation
};

inline RenderedPrompt render_prompt(const Sample& sample, const Tokenizer& tok,
                                    const std::string& system_text, bool include_completion) {
    if (count_placeholders(sample.prompt) != 1)
        throw DataError("render: prompt must contain exactly one " +
                        std::string(kAudioPlaceholder));
    std::size_t split = sample.prompt.find(kAudioPlaceholder);
    std::string before = sample.prompt.substr(0, split);
    std::string after = sample.prompt.substr(split + std::string(kAudioPlaceholder).size());

    RenderedPrompt r;
    auto append_text = [&](const std::string& text) {
        std::vector<int> bytes = tok.encode_bytes(text);
        r.ids.insert(r.ids.end(), bytes.begin(), bytes.end());
    };
    r.ids.push_back(Tokenizer::kBos);
    r.ids.push_back(Tokenizer::kSystem);
    append_text(system_text);
    r.ids.push_back(Tokenizer::kUser);
    append_text(before);
    r.placeholder_pos = r.ids.size();
    r.ids.push_back(Tokenizer::kAudio);
    append_text(after);
    r.ids.push_back(Tokenizer::kAssistant);
    if (include_completion) {
        r.completion.start = r.ids.size();
        append_text(sample.completion);
        r.ids.push_back(Tokenizer::kEos);
        r.completion.len = r.ids.size() - r.completion.start;
    }
    return r;
}

// ---------------------------------------------------------------------------
// collation
// ---------------------------------------------------------------------------

struct CollateConfig {
    double audio_max_seconds = 4.0;
    int n_mels = 80;
    std::string system_text;
    std::string base_dir;  // resolves relative WAV paths
    int threads = 1;
};

struct Batch {
    std::vector<MelSpectrogram> mels;             // one per sample, equal shapes
    std::vector<std::vector<int>> tokens;         // right-padded with <|pad|>
    std::vector<std::vector<std::uint8_t>> loss_mask;  // text coords, pads false
    std::vector<std::vector<std::uint8_t>> attn_mask;  // text coords, pads false
    std::vector<CompletionSpan> completion;
    std::vector<std::size_t> placeholder_pos;
    std::vector<std::size_t> true_len;
    std::vector<std::string> ids;

    std::size_t size() const { return tokens.size(); }
    std::size_t width() const { return tokens.empty() ? 0 : tokens[0].size(); }
};

// Featurized samples ready for batching; training prepares once and reuses
// across epochs.
struct PreparedDataset {
    std::vector<MelSpectrogram> mels;
    std::vector<RenderedPrompt> rendered;
    std::vector<std::string> ids;

    static PreparedDataset prepare(const std::vector<Sample>& samples, const Tokenizer& tok,
                                   const CollateConfig& cfg) {
        if (samples.empty()) throw DataError("collate: empty sample set");
        PreparedDataset prep;
        std::size_t n = samples.size();
        prep.mels.resize(n);
        prep.rendered.resize(n);
        prep.ids.resize(n);
        parallel_for(n, cfg.threads, [&](std::size_t i) {
            const Sample& s = samples[i];
            AudioInput audio = load_audio_field(s.audio, cfg.base_dir);
            prep.mels[i] = log_mel(pad_or_trim(audio, cfg.audio_max_seconds),
                                   static_cast<std::size_t>(cfg.n_mels));
            prep.rendered[i] = render_prompt(s, tok, cfg.system_text, /*include_completion=*/true);
            prep.ids[i] = s.id;
        });
        return prep;
    }

    Batch batch_of(const std::vector<std::size_t>& indices) const {
        if (indices.empty()) throw DataError("collate: empty batch");
        Batch batch;
        std::size_t n = indices.size();
        std::size_t widest = 0;
        for (std::size_t idx : indices) widest = std::max(widest, rendered[idx].ids.size());
        batch.mels.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t idx = indices[i];
            const RenderedPrompt& r = rendered[idx];
            batch.mels.push_back(mels[idx]);
            batch.tokens.push_back(r.ids);
            batch.tokens.back().resize(widest, Tokenizer::kPad);
            std::vector<std::uint8_t> loss(widest, 0);
            for (std::size_t p = 0; p < r.completion.len; ++p)
                loss[r.completion.start + p] = 1;
            batch.loss_mask.push_back(std::move(loss));
            std::vector<std::uint8_t> attn(widest, 0);
            std::fill_n(attn.begin(), r.ids.size(), std::uint8_t{1});
            batch.attn_mask.push_back(std::move(attn));
            batch.completion.push_back(r.completion);
            batch.placeholder_pos.push_back(r.placeholder_pos);
            batch.true_len.push_back(r.ids.size());
            batch.ids.push_back(ids[idx]);
        }
        return batch;
    }
};

inline Batch collate(const std::vector<Sample>& samples, const Tokenizer& tok,
                     const CollateConfig& cfg) {
    PreparedDataset prep = PreparedDataset::prepare(samples, tok, cfg);
    std::vector<std::size_t> all(samples.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return prep.batch_of(all);
}

}  // namespace alm
