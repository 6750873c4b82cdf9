// Copyright (c) 2026 almlab contributors
// SPDX-License-Identifier: Apache-2.0
//
// Log-mel frontend, Whisper-convention: 25 ms Hann window, 10 ms hop,
// 80 Slaney-scale mel filters, log10 power floored at (max - 8) and affinely
// rescaled by (x + 4) / 4. Frames are centered, so every input yields exactly
// floor(samples / hop) frames (100 frames per second at 16 kHz).

#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "almlab/audio.hpp"
#include "almlab/common.hpp"

namespace alm {

inline constexpr int kMelFrameRate = 100;          // frames per second
inline constexpr std::size_t kWindowSamples = 400;  // 25 ms at 16 kHz
inline constexpr std::size_t kHopSamples = 160;     // 10 ms at 16 kHz
inline constexpr std::size_t kFftSize = 512;        // window zero-padded to a radix-2 size

struct MelSpectrogram {
    std::vector<double> values;  // row-major [n_frames, n_mels]
    std::size_t n_frames = 0;
    std::size_t n_mels = 0;
    double frame_rate = kMelFrameRate;

    double at(std::size_t frame, std::size_t mel) const { return values[frame * n_mels + mel]; }
};

namespace melscale {

// Slaney mel scale: linear below 1 kHz, logarithmic above.
inline double hz_to_mel(double hz) {
    constexpr double f_sp = 200.0 / 3.0;
    constexpr double min_log_hz = 1000.0;
    const double min_log_mel = min_log_hz / f_sp;
    const double logstep = std::log(6.4) / 27.0;
    if (hz < min_log_hz) return hz / f_sp;
    return min_log_mel + std::log(hz / min_log_hz) / logstep;
}

inline double mel_to_hz(double mel) {
    constexpr double f_sp = 200.0 / 3.0;
    constexpr double min_log_hz = 1000.0;
    const double min_log_mel = min_log_hz / f_sp;
    const double logstep = std::log(6.4) / 27.0;
    if (mel < min_log_mel) return mel * f_sp;
    return min_log_hz * std::exp(logstep * (mel - min_log_mel));
}

}  // namespace melscale

// Triangular Slaney-normalized filterbank over kFftSize/2 + 1 frequency bins.
inline std::vector<double> mel_filterbank(std::size_t n_mels, double fmax = kSampleRate / 2.0) {
    const std::size_t n_bins = kFftSize / 2 + 1;
    const double mel_max = melscale::hz_to_mel(fmax);
    std::vector<double> points(n_mels + 2);
    for (std::size_t i = 0; i < points.size(); ++i)
        points[i] = melscale::mel_to_hz(mel_max * static_cast<double>(i) /
                                        static_cast<double>(n_mels + 1));
    std::vector<double> fb(n_mels * n_bins, 0.0);
    for (std::size_t m = 0; m < n_mels; ++m) {
        double lo = points[m], center = points[m + 1], hi = points[m + 2];
        double norm = 2.0 / (hi - lo);
        for (std::size_t k = 0; k < n_bins; ++k) {
            double f = static_cast<double>(k) * kSampleRate / kFftSize;
            double w = 0.0;
            if (f > lo && f < hi) w = f <= center ? (f - lo) / (center - lo) : (hi - f) / (hi - center);
            fb[m * n_bins + k] = w * norm;
        }
    }
    return fb;
}

namespace detail {

// In-place iterative radix-2 FFT.
inline void fft(std::vector<std::complex<double>>& a) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
        std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                auto u = a[i + k];
                auto v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

}  // namespace detail

inline MelSpectrogram log_mel(const AudioInput& audio, std::size_t n_mels = 80) {
    if (audio.samples.size() < kWindowSamples)
        throw DataError("log_mel: audio shorter than one 25 ms window");

    const std::size_t n_frames = audio.samples.size() / kHopSamples;
    const std::size_t n_bins = kFftSize / 2 + 1;

    std::vector<double> hann(kWindowSamples);
    for (std::size_t i = 0; i < kWindowSamples; ++i)
        hann[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                       static_cast<double>(kWindowSamples));

    const auto fb = mel_filterbank(n_mels);
    MelSpectrogram mel;
    mel.n_frames = n_frames;
    mel.n_mels = n_mels;
    mel.values.assign(n_frames * n_mels, 0.0);

    std::vector<std::complex<double>> buf(kFftSize);
    std::vector<double> power(n_bins);
    const std::ptrdiff_t half_window = static_cast<std::ptrdiff_t>(kWindowSamples / 2);
    for (std::size_t t = 0; t < n_frames; ++t) {
        std::fill(buf.begin(), buf.end(), std::complex<double>(0.0));
        std::ptrdiff_t center = static_cast<std::ptrdiff_t>(t * kHopSamples);
        for (std::size_t i = 0; i < kWindowSamples; ++i) {
            std::ptrdiff_t src = center - half_window + static_cast<std::ptrdiff_t>(i);
            double s = (src >= 0 && src < static_cast<std::ptrdiff_t>(audio.samples.size()))
                           ? static_cast<double>(audio.samples[static_cast<std::size_t>(src)])
                           : 0.0;
            buf[i] = s * hann[i];
        }
        detail::fft(buf);
        for (std::size_t k = 0; k < n_bins; ++k) power[k] = std::norm(buf[k]);
        for (std::size_t m = 0; m < n_mels; ++m) {
            const double* row = fb.data() + m * n_bins;
            double acc = 0.0;
            for (std::size_t k = 0; k < n_bins; ++k) acc += row[k] * power[k];
            mel.values[t * n_mels + m] = std::log10(std::max(acc, 1e-10));
        }
    }

    double mx = *std::max_element(mel.values.begin(), mel.values.end());
    for (auto& v : mel.values) v = (std::max(v, mx - 8.0) + 4.0) / 4.0;
    return mel;
}

// The post-floor value silent/padded frames take, given the clip maximum of
// the raw log10 spectrogram.
inline double log_mel_floor_value(const MelSpectrogram& mel) {
    double mn = mel.values[0];
    for (double v : mel.values) mn = std::min(mn, v);
    return mn;
}

}  // namespace alm
