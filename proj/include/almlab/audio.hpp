// Copyright (c) 2026 almlab contributors
// SPDX-License-Identifier: Apache-2.0
//
// Waveform ingestion and synthesis. Only 16 kHz mono is accepted anywhere;
// WAV files with any other sample rate are rejected outright (no resampling).

#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "almlab/common.hpp"
#include "almlab/rng.hpp"

namespace alm {

inline constexpr int kSampleRate = 16000;

struct AudioInput {
    std::vector<float> samples;  // PCM in [-1, 1]
    int sample_rate = kSampleRate;

    static AudioInput make(std::vector<float> samples, int sample_rate = kSampleRate) {
        if (sample_rate != kSampleRate)
            throw DataError("audio: sample rate must be 16000 Hz, got " +
                            std::to_string(sample_rate));
        if (samples.empty()) throw DataError("audio: empty waveform");
        return AudioInput{std::move(samples), sample_rate};
    }

    double seconds() const { return static_cast<double>(samples.size()) / sample_rate; }
};

// Right-pads with zeros or truncates to exactly target_seconds.
inline AudioInput pad_or_trim(const AudioInput& audio, double target_seconds) {
    if (target_seconds <= 0) throw UsageError("pad_or_trim: target_seconds must be positive");
    std::size_t target = static_cast<std::size_t>(std::llround(target_seconds * audio.sample_rate));
    std::vector<float> out(audio.samples.begin(),
                           audio.samples.begin() +
                               static_cast<std::ptrdiff_t>(std::min(target, audio.samples.size())));
    out.resize(target, 0.0f);
    return AudioInput{std::move(out), audio.sample_rate};
}

// ---------------------------------------------------------------------------
// WAV (16-bit mono PCM only)
// ---------------------------------------------------------------------------

namespace detail {

inline std::uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline std::uint16_t read_u16(std::istream& is) {
    unsigned char b[2];
    is.read(reinterpret_cast<char*>(b), 2);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

inline void write_u32(std::ostream& os, std::uint32_t v) {
    char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                 static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    os.write(b, 4);
}

inline void write_u16(std::ostream& os, std::uint16_t v) {
    char b[2] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
    os.write(b, 2);
}

}  // namespace detail

inline AudioInput read_wav(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("wav: cannot open " + path);
    char tag[4];
    is.read(tag, 4);
    if (!is || std::memcmp(tag, "RIFF", 4) != 0) throw DataError("wav: not a RIFF file: " + path);
    detail::read_u32(is);  // riff size
    is.read(tag, 4);
    if (!is || std::memcmp(tag, "WAVE", 4) != 0) throw DataError("wav: not a WAVE file: " + path);

    bool have_fmt = false;
    std::uint16_t channels = 0, bits = 0, format = 0;
    std::uint32_t rate = 0;
    std::vector<float> samples;
    while (is.read(tag, 4)) {
        std::uint32_t chunk_size = detail::read_u32(is);
        if (std::memcmp(tag, "fmt ", 4) == 0) {
            format = detail::read_u16(is);
            channels = detail::read_u16(is);
            rate = detail::read_u32(is);
            detail::read_u32(is);  // byte rate
            detail::read_u16(is);  // block align
            bits = detail::read_u16(is);
            if (chunk_size > 16) is.ignore(chunk_size - 16);
            have_fmt = true;
        } else if (std::memcmp(tag, "data", 4) == 0) {
            if (!have_fmt) throw DataError("wav: data chunk before fmt in " + path);
            if (format != 1) throw DataError("wav: only PCM supported: " + path);
            if (channels != 1) throw DataError("wav: only mono supported: " + path);
            if (bits != 16) throw DataError("wav: only 16-bit supported: " + path);
            if (rate != kSampleRate)
                throw DataError("wav: sample rate " + std::to_string(rate) +
                                " != 16000 (no resampling): " + path);
            std::size_t n = chunk_size / 2;
            samples.resize(n);
            for (std::size_t i = 0; i < n; ++i) {
                std::uint16_t raw = detail::read_u16(is);
                samples[i] = static_cast<float>(static_cast<std::int16_t>(raw)) / 32768.0f;
            }
            if (!is) throw DataError("wav: truncated data chunk in " + path);
            return AudioInput::make(std::move(samples));
        } else {
            is.ignore(chunk_size + (chunk_size & 1));
        }
    }
    throw DataError("wav: no data chunk in " + path);
}

inline void write_wav(const std::string& path, const AudioInput& audio) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("wav: cannot write " + path);
    std::uint32_t data_bytes = static_cast<std::uint32_t>(audio.samples.size() * 2);
    os.write("RIFF", 4);
    detail::write_u32(os, 36 + data_bytes);
    os.write("WAVE", 4);
    os.write("fmt ", 4);
    detail::write_u32(os, 16);
    detail::write_u16(os, 1);  // PCM
    detail::write_u16(os, 1);  // mono
    detail::write_u32(os, kSampleRate);
    detail::write_u32(os, kSampleRate * 2);
    detail::write_u16(os, 2);
    detail::write_u16(os, 16);
    os.write("data", 4);
    detail::write_u32(os, data_bytes);
    for (float s : audio.samples) {
        float clamped = std::min(1.0f, std::max(-1.0f, s));
        auto v = static_cast<std::int16_t>(std::lround(clamped * 32767.0f));
        detail::write_u16(os, static_cast<std::uint16_t>(v));
    }
    if (!os) throw DataError("wav: write failed for " + path);
}

// ---------------------------------------------------------------------------
// synthetic sources
// ---------------------------------------------------------------------------

namespace synth {

inline void add_fade(std::vector<float>& s, std::size_t begin, std::size_t end) {
    std::size_t fade = std::min<std::size_t>(160, (end - begin) / 4);  // 10 ms
    for (std::size_t i = 0; i < fade; ++i) {
        float g = static_cast<float>(i) / static_cast<float>(fade);
        s[begin + i] *= g;
        s[end - 1 - i] *= g;
    }
}

inline std::vector<float> sine(double freq, std::size_t n, float amp) {
    std::vector<float> s(n);
    double w = 2.0 * std::numbers::pi * freq / kSampleRate;
    for (std::size_t i = 0; i < n; ++i) s[i] = amp * static_cast<float>(std::sin(w * static_cast<double>(i)));
    return s;
}

// Two equal-length tones back to back.
inline AudioInput two_tone(double f1, double f2, double seconds) {
    std::size_t n = static_cast<std::size_t>(seconds * kSampleRate);
    std::size_t half = n / 2;
    std::vector<float> s(n, 0.0f);
    auto a = sine(f1, half, 0.45f);
    auto b = sine(f2, n - half, 0.45f);
    std::copy(a.begin(), a.end(), s.begin());
    std::copy(b.begin(), b.end(), s.begin() + static_cast<std::ptrdiff_t>(half));
    add_fade(s, 0, half);
    add_fade(s, half, n);
    return AudioInput::make(std::move(s));
}

inline AudioInput tone(double freq, double seconds) {
    std::size_t n = static_cast<std::size_t>(seconds * kSampleRate);
    auto s = sine(freq, n, 0.45f);
    add_fade(s, 0, n);
    return AudioInput::make(std::move(s));
}

// Evenly spaced decaying pings, one per beat.
inline AudioInput clicks(int count, double seconds) {
    if (count < 1) throw UsageError("clicks: count must be >= 1");
    std::size_t n = static_cast<std::size_t>(seconds * kSampleRate);
    std::vector<float> s(n, 0.0f);
    std::size_t spacing = n / static_cast<std::size_t>(count);
    std::size_t ping_len = std::min<std::size_t>(spacing / 2, 800);
    double w = 2.0 * std::numbers::pi * 1000.0 / kSampleRate;
    for (int c = 0; c < count; ++c) {
        std::size_t start = static_cast<std::size_t>(c) * spacing + spacing / 8;
        for (std::size_t i = 0; i < ping_len && start + i < n; ++i) {
            double env = std::exp(-5.0 * static_cast<double>(i) / static_cast<double>(ping_len));
            s[start + i] += 0.6f * static_cast<float>(env * std::sin(w * static_cast<double>(i)));
        }
    }
    return AudioInput::make(std::move(s));
}

// Syllable-like bursts: amplitude-modulated tone packets separated by gaps.
inline AudioInput bursts(int count, double seconds, std::uint64_t seed) {
    if (count < 1) throw UsageError("bursts: count must be >= 1");
    std::size_t n = static_cast<std::size_t>(seconds * kSampleRate);
    std::vector<float> s(n, 0.0f);
    Rng rng(seed);
    std::size_t slot = n / static_cast<std::size_t>(count);
    for (int c = 0; c < count; ++c) {
        std::size_t start = static_cast<std::size_t>(c) * slot + slot / 6;
        std::size_t len = std::min<std::size_t>(slot / 2, 2400);  // <= 150 ms
        double carrier = rng.uniform(180.0, 320.0);
        double mod = rng.uniform(20.0, 40.0);
        double wc = 2.0 * std::numbers::pi * carrier / kSampleRate;
        double wm = 2.0 * std::numbers::pi * mod / kSampleRate;
        for (std::size_t i = 0; i < len && start + i < n; ++i) {
            double t = static_cast<double>(i);
            double env = std::sin(std::numbers::pi * t / static_cast<double>(len));
            s[start + i] += 0.5f * static_cast<float>(env * std::sin(wc * t) *
                                                      (0.6 + 0.4 * std::sin(wm * t)));
        }
    }
    return AudioInput::make(std::move(s));
}

}  // namespace synth

// Renders the inline "audio" manifest object. Recognized forms:
//   {"type":"two_tone","f1":440,"f2":523,"seconds":1.0}
//   {"type":"tone","freq":440,"seconds":1.0}
//   {"type":"clicks","count":4,"seconds":2.0}
//   {"type":"bursts","count":3,"seconds":1.5,"seed":7}
inline AudioInput render_audio_spec(const nlohmann::json& spec) {
    if (!spec.is_object() || !spec.contains("type"))
        throw DataError("audio spec: expected an object with a 'type' field");
    auto need = [&](const char* key) -> const nlohmann::json& {
        if (!spec.contains(key))
            throw DataError(std::string("audio spec: missing field '") + key + "'");
        return spec.at(key);
    };
    std::string type = spec.at("type").get<std::string>();
    double seconds = need("seconds").get<double>();
    if (seconds <= 0) throw DataError("audio spec: seconds must be positive");
    if (type == "two_tone")
        return synth::two_tone(need("f1").get<double>(), need("f2").get<double>(), seconds);
    if (type == "tone") return synth::tone(need("freq").get<double>(), seconds);
    if (type == "clicks") return synth::clicks(need("count").get<int>(), seconds);
    if (type == "bursts")
        return synth::bursts(need("count").get<int>(), seconds,
                             spec.value("seed", std::uint64_t{0}));
    throw DataError("audio spec: unknown type '" + type + "'");
}

// Loads a manifest audio field: a string is a WAV path (relative paths are
// resolved against base_dir), an object is an inline synthetic spec.
inline AudioInput load_audio_field(const nlohmann::json& audio, const std::string& base_dir) {
    if (audio.is_string()) {
        std::string p = audio.get<std::string>();
        if (!p.empty() && p[0] != '/' && !base_dir.empty()) p = base_dir + "/" + p;
        return read_wav(p);
    }
    return render_audio_spec(audio);
}

}  // namespace alm
