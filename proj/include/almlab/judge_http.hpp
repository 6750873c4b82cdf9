// Copyright (c) 2026 almlab contributors
// SPDX-License-Identifier: Apache-2.0
//
// HTTP chat-completion judge client. Separate header so the HTTP stack is
// only compiled where it is used.

#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "almlab/judge.hpp"

namespace alm {

inline std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

struct HttpJudgeConfig {
    std::string base_url;  // e.g. http://127.0.0.1:8080
    std::string path = "/v1/chat/completions";
    std::string api_key_env = "JUDGE_API_KEY";
    std::string cache_dir;  // empty disables the on-disk cache
    int timeout_seconds = 30;
    int max_retries = 2;
};

class HttpJudgeClient : public JudgeClient {
public:
    explicit HttpJudgeClient(HttpJudgeConfig cfg) : cfg_(std::move(cfg)) {
        if (cfg_.base_url.empty()) throw UsageError("judge http: base_url is required");
        if (!cfg_.cache_dir.empty()) std::filesystem::create_directories(cfg_.cache_dir);
    }

    std::string complete(const ChatRequest& request, const std::string& cache_salt) override {
        std::string body = request.to_json().dump();
        std::string cache_path;
        if (!cfg_.cache_dir.empty()) {
            char hex[17];
            std::snprintf(hex, sizeof(hex), "%016llx",
                          static_cast<unsigned long long>(fnv1a64(body + "|" + cache_salt)));
            cache_path = cfg_.cache_dir + "/" + hex + ".json";
            std::ifstream cached(cache_path);
            if (cached) {
                nlohmann::json j = nlohmann::json::parse(cached, nullptr, false);
                if (!j.is_discarded() && j.contains("content"))
                    return j.at("content").get<std::string>();
            }
        }

        httplib::Client client(cfg_.base_url);
        client.set_connection_timeout(cfg_.timeout_seconds);
        client.set_read_timeout(cfg_.timeout_seconds);
        httplib::Headers headers;
        if (const char* key = std::getenv(cfg_.api_key_env.c_str()); key && *key)
            headers.emplace("Authorization", std::string("Bearer ") + key);

        std::string last_error;
        for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
            auto res = client.Post(cfg_.path, headers, body, "application/json");
            if (!res) {
                last_error = "transport error (" + httplib::to_string(res.error()) + ")";
                continue;
            }
            if (res->status >= 500) {
                last_error = "server status " + std::to_string(res->status);
                continue;
            }
            if (res->status != 200)
                throw ServiceError("judge http: status " + std::to_string(res->status) + ": " +
                                   res->body);
            std::string content = extract_content(res->body);
            if (!cache_path.empty()) {
                std::ofstream out(cache_path);
                out << nlohmann::json{{"request", request.to_json()},
                                      {"salt", cache_salt},
                                      {"content", content}}
                           .dump();
            }
            return content;
        }
        throw ServiceError("judge http: " + last_error + " after " +
                           std::to_string(cfg_.max_retries + 1) + " attempts");
    }

private:
    static std::string extract_content(const std::string& body) {
        nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
        if (j.is_discarded()) throw ServiceError("judge http: response is not JSON");
        try {
            return j.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception&) {
            throw ServiceError("judge http: response missing choices[0].message.content");
        }
    }

    HttpJudgeConfig cfg_;
};

}  // namespace alm
