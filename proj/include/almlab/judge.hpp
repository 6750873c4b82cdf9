// Copyright (c) 2026 almlab contributors
// SPDX-License-Identifier: Apache-2.0
//
// Judged chat evaluation over a pluggable chat-completion client. Each item
// is judged twice with the reference/candidate order swapped to cancel
// position bias, and the candidate's two scores are averaged. A run does
// `trials` full passes and reports the median of the per-trial means.
//
// The HTTP client speaks plain chat-completion JSON and caches responses on
// disk keyed by a hash of (request, salt) so re-runs are reproducible without
// re-querying; the deterministic stub keeps tests offline.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "almlab/common.hpp"

namespace alm {

inline constexpr const char* kJudgePromptVersion = "judge-prompt/v1";

struct ChatMessage {
    std::string role;
    std::string content;
};

struct ChatRequest {
    std::string model = "gpt-4-turbo";
    std::vector<ChatMessage> messages;
    double temperature = 1.0;

    nlohmann::json to_json() const {
        nlohmann::json msgs = nlohmann::json::array();
        for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
        return {{"model", model}, {"messages", msgs}, {"temperature", temperature}};
    }
};

class JudgeClient {
public:
    virtual ~JudgeClient() = default;
    // `cache_salt` distinguishes logically independent calls that share a
    // request body (e.g. repeated trials).
    virtual std::string complete(const ChatRequest& request, const std::string& cache_salt) = 0;
};

// Deterministic scripted client for tests and offline runs.
class StubJudgeClient : public JudgeClient {
public:
    using Handler = std::function<std::string(const ChatRequest&)>;

    explicit StubJudgeClient(Handler handler) : handler_(std::move(handler)) {}

    // Convenience: replies cycle through fixed texts.
    static StubJudgeClient cycling(std::vector<std::string> replies) {
        auto shared = std::make_shared<std::pair<std::mutex, std::size_t>>();
        return StubJudgeClient([shared, replies = std::move(replies)](const ChatRequest&) {
            std::lock_guard<std::mutex> lock(shared->first);
            return replies[shared->second++ % replies.size()];
        });
    }

    std::string complete(const ChatRequest& request, const std::string&) override {
        return handler_(request);
    }

private:
    Handler handler_;
};

// ---------------------------------------------------------------------------
// judge prompt and score parsing
// ---------------------------------------------------------------------------

inline std::vector<ChatMessage> build_judge_messages(const std::string& question,
                                                     const std::string& first_answer,
                                                     const std::string& second_answer) {
    std::string user =
        "[Question]\n" + question + "\n\n[Assistant 1]\n" + first_answer +
        "\n\n[Assistant 2]\n" + second_answer +
        "\n\nRate each assistant's answer to the question about the audio for usefulness, "
        "relevance, accuracy, and comprehensiveness on a scale of 1 to 10. Reply with exactly "
        "two numbers separated by a space: the score for Assistant 1, then the score for "
        "Assistant 2.";
    return {{"system",
             std::string("You are an impartial evaluator of AI assistant answers. (") +
                 kJudgePromptVersion + ")"},
            {"user", user}};
}

// First line containing exactly two numeric tokens in [1, 10].
inline std::optional<std::pair<double, double>> parse_two_scores(const std::string& reply) {
    std::istringstream lines(reply);
    std::string line;
    while (std::getline(lines, line)) {
        std::istringstream words(line);
        std::string word;
        std::vector<double> nums;
        while (words >> word) {
            try {
                std::size_t used = 0;
                double v = std::stod(word, &used);
                if (used == word.size()) nums.push_back(v);
            } catch (...) {
            }
        }
        if (nums.size() == 2 && nums[0] >= 1 && nums[0] <= 10 && nums[1] >= 1 && nums[1] <= 10)
            return std::make_pair(nums[0], nums[1]);
    }
    return std::nullopt;
}

// One judged comparison: two calls with swapped answer order; the candidate's
// score is read from its position in each reply; result is the mean. A parse
// failure is retried once (fresh call), then surfaced as a ServiceError.
inline double judge_pair(const std::string& question, const std::string& reference,
                         const std::string& candidate, JudgeClient& client,
                         const std::string& cache_salt = "", const std::string& model = "gpt-4-turbo",
                         double temperature = 1.0) {
    auto one_call = [&](bool candidate_second, const std::string& salt) {
        ChatRequest req;
        req.model = model;
        req.temperature = temperature;
        req.messages = candidate_second ? build_judge_messages(question, reference, candidate)
                                        : build_judge_messages(question, candidate, reference);
        for (int attempt = 0; attempt < 2; ++attempt) {
            std::string reply =
                client.complete(req, salt + (attempt ? ":retry" : ""));
            if (auto scores = parse_two_scores(reply))
                return candidate_second ? scores->second : scores->first;
        }
        throw ServiceError("judge: unparseable reply twice for salt '" + salt + "'");
    };
    double a = one_call(true, cache_salt + ":fwd");
    double b = one_call(false, cache_salt + ":rev");
    return 0.5 * (a + b);
}

// ---------------------------------------------------------------------------
// chat-eval items and run
// ---------------------------------------------------------------------------

struct ChatEvalItem {
    std::string id;
    std::string question;
    std::string reference;
    std::string category;  // speech | sound | music | mixed

    static ChatEvalItem from_json(const nlohmann::json& j) {
        static const std::set<std::string> allowed = {"id", "question", "reference", "category"};
        for (const auto& [key, _] : j.items())
            if (!allowed.count(key)) throw DataError("chat item: unknown field '" + key + "'");
        for (const char* key : {"id", "question", "reference", "category"})
            if (!j.contains(key))
                throw DataError(std::string("chat item: missing field '") + key + "'");
        ChatEvalItem item{j.at("id").get<std::string>(), j.at("question").get<std::string>(),
                          j.at("reference").get<std::string>(), j.at("category").get<std::string>()};
        if (item.category != "speech" && item.category != "sound" && item.category != "music" &&
            item.category != "mixed")
            throw DataError("chat item " + item.id + ": category must be speech|sound|music|mixed");
        return item;
    }
};

inline std::vector<ChatEvalItem> load_chat_items(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError("chat items: cannot open " + path);
    std::vector<ChatEvalItem> items;
    std::set<std::string> ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            items.push_back(ChatEvalItem::from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw DataError("chat items " + path + " line " + std::to_string(line_no) + ": " +
                            e.what());
        } catch (const DataError& e) {
            throw DataError("chat items " + path + " line " + std::to_string(line_no) + ": " +
                            e.what());
        }
        if (!ids.insert(items.back().id).second)
            throw DataError("chat items " + path + ": duplicate id '" + items.back().id + "'");
    }
    return items;
}

// JSONL of {"id": ..., "response": ...}
inline std::map<std::string, std::string> load_responses(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError("responses: cannot open " + path);
    std::map<std::string, std::string> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DataError("responses " + path + " line " + std::to_string(line_no) + ": " +
                            e.what());
        }
        if (!j.contains("id") || !j.contains("response"))
            throw DataError("responses " + path + " line " + std::to_string(line_no) +
                            ": need id and response");
        if (!out.emplace(j.at("id").get<std::string>(), j.at("response").get<std::string>()).second)
            throw DataError("responses " + path + ": duplicate id at line " +
                            std::to_string(line_no));
    }
    return out;
}

struct ChatEvalReport {
    std::vector<double> trial_means;
    double median = 0.0;
    std::map<std::string, double> per_category_median;
    std::map<std::string, std::vector<double>> item_scores;  // id -> per-trial scores
    std::vector<std::string> failed_items;

    nlohmann::json to_json() const {
        nlohmann::json items;
        for (const auto& [id, scores] : item_scores) items[id] = scores;
        return {{"trial_means", trial_means},
                {"median", median},
                {"per_category_median", per_category_median},
                {"item_scores", items},
                {"failed_items", failed_items},
                {"judge_prompt_version", kJudgePromptVersion}};
    }
};

inline double median_of(std::vector<double> values) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    std::size_t mid = values.size() / 2;
    if (values.size() % 2 == 1) return values[mid];
    return 0.5 * (values[mid - 1] + values[mid]);
}

inline ChatEvalReport run_chat_eval(const std::vector<ChatEvalItem>& items,
                                    const std::map<std::string, std::string>& responses,
                                    JudgeClient& client, int trials = 3, int parallelism = 4,
                                    const std::string& model = "gpt-4-turbo",
                                    double temperature = 1.0) {
    if (items.empty()) throw DataError("chat eval: no items");
    if (trials < 1) throw UsageError("chat eval: trials must be >= 1");
    for (const auto& item : items)
        if (!responses.count(item.id))
            throw DataError("chat eval: no response for item '" + item.id + "'");

    ChatEvalReport report;
    std::vector<std::map<std::string, std::vector<double>>> per_trial_by_category(
        static_cast<std::size_t>(trials));
    std::set<std::string> failed;
    std::mutex failed_mutex;

    for (int trial = 0; trial < trials; ++trial) {
        std::vector<double> scores(items.size(), std::nan(""));
        parallel_for(items.size(), parallelism, [&](std::size_t i) {
            const ChatEvalItem& item = items[i];
            std::string salt = "trial" + std::to_string(trial) + ":" + item.id;
            try {
                scores[i] = judge_pair(item.question, item.reference, responses.at(item.id),
                                       client, salt, model, temperature);
            } catch (const ServiceError&) {
                std::lock_guard<std::mutex> lock(failed_mutex);
                failed.insert(item.id);  // flagged; the run continues
            }
        });
        double sum = 0.0;
        std::size_t n = 0;
        for (std::size_t i = 0; i < items.size(); ++i) {
            if (std::isnan(scores[i])) continue;
            sum += scores[i];
            ++n;
            per_trial_by_category[static_cast<std::size_t>(trial)][items[i].category].push_back(
                scores[i]);
            report.item_scores[items[i].id].push_back(scores[i]);
        }
        if (n == 0) throw ServiceError("chat eval: every item failed in trial " +
                                       std::to_string(trial));
        report.trial_means.push_back(sum / static_cast<double>(n));
    }

    report.median = median_of(report.trial_means);
    std::set<std::string> categories;
    for (const auto& item : items) categories.insert(item.category);
    for (const auto& cat : categories) {
        std::vector<double> cat_means;
        for (int trial = 0; trial < trials; ++trial) {
            const auto& by_cat = per_trial_by_category[static_cast<std::size_t>(trial)];
            auto it = by_cat.find(cat);
            if (it == by_cat.end() || it->second.empty()) continue;
            double s = 0.0;
            for (double v : it->second) s += v;
            cat_means.push_back(s / static_cast<double>(it->second.size()));
        }
        if (!cat_means.empty()) report.per_category_median[cat] = median_of(cat_means);
    }
    report.failed_items.assign(failed.begin(), failed.end());
    return report;
}

}  // namespace alm
