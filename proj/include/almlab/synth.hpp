// Copyright (c) 2026 almlab contributors
// SPDX-License-Identifier: Apache-2.0
//
// Seeded synthetic audio-QA generator. Three task families with labels that
// follow directly from the generation parameters:
//   sound  - two-tone pitch comparison
//   music  - beat counting over a click track
//   speech - syllable-like burst counting
// Each sample is emitted either free-form or as 4-choice QA. Everything is a
// pure function of (spec, seed).

#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "almlab/data.hpp"
#include "almlab/rng.hpp"

namespace alm {

struct SynthSpec {
    int n_samples = 32;
    double seconds = 2.0;
    double mc_fraction = 0.5;       // fraction emitted as 4-choice QA
    double sound_fraction = 0.375;  // remaining mass split between music/speech
    double music_fraction = 0.3125;
    bool voice_instruction = false;  // instruction phrasing on free-form samples
    std::string id_prefix = "synth";

    void validate() const {
        if (n_samples < 1) throw UsageError("synth: n_samples must be >= 1");
        if (seconds < 0.5) throw UsageError("synth: seconds must be >= 0.5");
        if (mc_fraction < 0 || mc_fraction > 1) throw UsageError("synth: bad mc_fraction");
        if (sound_fraction < 0 || music_fraction < 0 || sound_fraction + music_fraction > 1)
            throw UsageError("synth: domain fractions must be nonnegative and sum <= 1");
    }

    static SynthSpec from_json(const nlohmann::json& j) {
        static const std::set<std::string> allowed = {
            "n_samples", "seconds",           "mc_fraction", "sound_fraction",
            "music_fraction", "voice_instruction", "id_prefix"};
        for (const auto& [key, _] : j.items())
            if (!allowed.count(key)) throw UsageError("synth spec: unknown field '" + key + "'");
        SynthSpec s;
        s.n_samples = j.value("n_samples", s.n_samples);
        s.seconds = j.value("seconds", s.seconds);
        s.mc_fraction = j.value("mc_fraction", s.mc_fraction);
        s.sound_fraction = j.value("sound_fraction", s.sound_fraction);
        s.music_fraction = j.value("music_fraction", s.music_fraction);
        s.voice_instruction = j.value("voice_instruction", s.voice_instruction);
        s.id_prefix = j.value("id_prefix", s.id_prefix);
        s.validate();
        return s;
    }

    nlohmann::json to_json() const {
        return {{"n_samples", n_samples},
                {"seconds", seconds},
                {"mc_fraction", mc_fraction},
                {"sound_fraction", sound_fraction},
                {"music_fraction", music_fraction},
                {"voice_instruction", voice_instruction},
                {"id_prefix", id_prefix}};
    }
};

namespace detail {

inline const std::array<double, 10>& pitch_pool() {
    static const std::array<double, 10> pool = {220.0, 262.0, 330.0, 392.0, 440.0,
                                                494.0, 587.0, 659.0, 740.0, 784.0};
    return pool;
}

// Places `truth` among three distinct distractors, order shuffled per sample.
inline std::array<std::string, 4> mc_choices(const std::string& truth,
                                             std::vector<std::string> distractors, Rng& rng,
                                             int& answer_index) {
    rng.shuffle(distractors);
    std::array<std::string, 4> choices{};
    std::vector<std::string> all = {truth, distractors[0], distractors[1], distractors[2]};
    std::vector<std::size_t> order = {0, 1, 2, 3};
    rng.shuffle(order);
    for (std::size_t i = 0; i < 4; ++i) choices[i] = all[order[i]];
    answer_index = static_cast<int>(std::find(order.begin(), order.end(), 0) - order.begin());
    return choices;
}

inline std::string option_letter(int index) { return std::string(1, static_cast<char>('A' + index)); }

inline std::string mc_prompt(const std::string& question, const std::array<std::string, 4>& choices) {
    std::string p = std::string(kAudioPlaceholder) + "\n" + question + "\n";
    for (int i = 0; i < 4; ++i) p += option_letter(i) + ") " + choices[static_cast<std::size_t>(i)] + "\n";
    p.pop_back();  // no trailing newline
    return p;
}

}  // namespace detail

inline std::vector<Sample> synth_dataset(const SynthSpec& spec, std::uint64_t seed) {
    spec.validate();
    const int n = spec.n_samples;

    // Exact domain partition per the configured proportions.
    int n_sound = static_cast<int>(std::lround(spec.sound_fraction * n));
    int n_music = static_cast<int>(std::lround(spec.music_fraction * n));
    n_sound = std::min(n_sound, n);
    n_music = std::min(n_music, n - n_sound);
    std::vector<std::string> domains;
    domains.insert(domains.end(), static_cast<std::size_t>(n_sound), "sound");
    domains.insert(domains.end(), static_cast<std::size_t>(n_music), "music");
    domains.insert(domains.end(), static_cast<std::size_t>(n - n_sound - n_music), "speech");
    Rng layout_rng(mix_seed(seed, 0xD0));
    layout_rng.shuffle(domains);

    int n_mc = static_cast<int>(std::lround(spec.mc_fraction * n));
    std::vector<std::uint8_t> is_mc(static_cast<std::size_t>(n), 0);
    std::fill_n(is_mc.begin(), n_mc, std::uint8_t{1});
    layout_rng.shuffle(is_mc);

    int max_beats = std::min(9, std::max(3, static_cast<int>(spec.seconds * 3.5)));
    int max_bursts = std::min(4, std::max(2, static_cast<int>(spec.seconds * 2.0)));

    std::vector<Sample> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        Rng rng(mix_seed(seed, static_cast<std::uint64_t>(i) + 1));
        Sample s;
        char idbuf[32];
        std::snprintf(idbuf, sizeof(idbuf), "-%05d", i);
        s.id = spec.id_prefix + idbuf;
        s.domain = domains[static_cast<std::size_t>(i)];
        bool mc = is_mc[static_cast<std::size_t>(i)] != 0;

        std::string question, truth, free_completion, instruct_completion;
        std::vector<std::string> distractors;
        if (s.domain == "sound") {
            const auto& pool = detail::pitch_pool();
            std::size_t a = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(pool.size()) - 1));
            std::size_t b = a;
            while (b == a)
                b = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(pool.size()) - 1));
            s.audio = {{"type", "two_tone"}, {"f1", pool[a]}, {"f2", pool[b]}, {"seconds", spec.seconds}};
            bool higher = pool[b] > pool[a];
            question = "Is the second tone higher or lower in pitch than the first?";
            truth = higher ? "higher" : "lower";
            distractors = {higher ? "lower" : "higher", "the same pitch", "there is only one tone"};
            free_completion = std::string("The second tone is ") + truth + ".";
            instruct_completion =
                std::string("Two tones play in sequence; the second one is ") + truth + ".";
        } else if (s.domain == "music") {
            int beats = static_cast<int>(rng.uniform_int(2, max_beats));
            s.audio = {{"type", "clicks"}, {"count", beats}, {"seconds", spec.seconds}};
            question = "How many beats does this clip contain?";
            truth = std::to_string(beats);
            std::set<int> used = {beats};
            while (used.size() < 4) used.insert(static_cast<int>(rng.uniform_int(1, max_beats + 2)));
            for (int v : used)
                if (v != beats) distractors.push_back(std::to_string(v));
            free_completion = "There are " + truth + " beats.";
            instruct_completion = "A steady click track with " + truth + " beats.";
        } else {
            int bursts = static_cast<int>(rng.uniform_int(1, max_bursts));
            s.audio = {{"type", "bursts"},
                       {"count", bursts},
                       {"seconds", spec.seconds},
                       {"seed", rng.next_u64() & 0xffffffu}};
            question = "How many spoken syllables does the recording contain?";
            truth = std::to_string(bursts);
            std::set<int> used = {bursts};
            while (used.size() < 4) used.insert(static_cast<int>(rng.uniform_int(1, max_bursts + 3)));
            for (int v : used)
                if (v != bursts) distractors.push_back(std::to_string(v));
            free_completion = "The recording contains " + truth + " syllables.";
            instruct_completion = "A voice-like pattern of " + truth + " short syllables.";
        }

        if (mc) {
            int answer_index = 0;
            auto choices = detail::mc_choices(truth, distractors, rng, answer_index);
            s.prompt = detail::mc_prompt(question, choices);
            s.completion = detail::option_letter(answer_index) + ") " +
                           choices[static_cast<std::size_t>(answer_index)];
            s.choices = choices;
            s.answer_index = answer_index;
        } else if (spec.voice_instruction) {
            s.prompt = std::string(kAudioPlaceholder) + "\nDescribe the audio clip briefly.";
            s.completion = instruct_completion;
        } else {
            s.prompt = std::string(kAudioPlaceholder) + "\n" + question;
            s.completion = free_completion;
        }
        s.validate();
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace alm
