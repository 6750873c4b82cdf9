// Copyright (c) 2026 almlab contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace alm {

// Error taxonomy, mirrored by CLI exit codes.
struct Error : std::runtime_error {
    int exit_code;
    Error(int code, const std::string& what) : std::runtime_error(what), exit_code(code) {}
};

// Bad flags, bad config schema, violated call contracts.
struct UsageError : Error {
    explicit UsageError(const std::string& what) : Error(2, what) {}
};

// Malformed manifests, WAV files, checkpoints, responses.
struct DataError : Error {
    explicit DataError(const std::string& what) : Error(3, what) {}
};

// Non-finite values where finite ones are required.
struct NumericError : Error {
    explicit NumericError(const std::string& what) : Error(4, what) {}
};

// Judge endpoint unreachable / unusable.
struct ServiceError : Error {
    explicit ServiceError(const std::string& what) : Error(5, what) {}
};

struct ShapeError : UsageError {
    explicit ShapeError(const std::string& what) : UsageError(what) {}
};

inline void require(bool cond, const std::string& what) {
    if (!cond) throw UsageError(what);
}

template <typename T>
bool is_finite_value(T v) {
    return std::isfinite(static_cast<double>(v));
}

// Runs fn(0..n-1) on up to `threads` workers. Results must be written to
// per-index slots; completion order is unspecified.
inline void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            fn(i);
        }
    };
    std::size_t n_workers = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
}

}  // namespace alm
