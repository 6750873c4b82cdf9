// Copyright (c) 2026 almlab contributors
// SPDX-License-Identifier: Apache-2.0
//
// Multiple-choice scorer that checks answer content, not just option ids.
// Decision table (id = leading/trailing option-id token, C = set of option
// texts contained in the normalized response):
//
//   empty response                      -> incorrect, empty_generation
//   no id, C empty                      -> incorrect, no_match
//   no id, C = {c}                      -> correct iff c is the answer (content_only)
//   no id, |C| > 1                      -> incorrect, id_content_conflict (ambiguous)
//   id, C empty                         -> correct iff id is the answer (id_and_content)
//   id, C = {c}, c == id                -> correct iff id is the answer (id_and_content)
//   id in C (|C| > 1, id disambiguates) -> correct iff id is the answer (id_and_content)
//   id not in nonempty C                -> incorrect, id_content_conflict
//
// Content matching runs longest-option-first with occlusion so an option that
// is a substring of another ("guitar" vs "electric guitar") cannot
// double-match.

#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "almlab/common.hpp"
#include "almlab/data.hpp"

namespace alm {

struct McQuestion {
    std::string question;
    std::array<std::string, 4> choices;
    int answer_index = 0;
    std::string domain;

    void validate() const;

    static McQuestion from_sample(const Sample& s) {
        if (!s.choices || !s.answer_index)
            throw DataError("mc: sample " + s.id + " has no choices");
        McQuestion q{s.prompt, *s.choices, *s.answer_index, s.domain};
        q.validate();
        return q;
    }
};

enum class Outcome { Correct, Incorrect };
enum class MatchReason { IdAndContent, ContentOnly, IdContentConflict, NoMatch, EmptyGeneration };

struct Verdict {
    Outcome outcome = Outcome::Incorrect;
    MatchReason reason = MatchReason::NoMatch;
    int matched_option = -1;  // option the verdict was based on, when any
};

inline const char* reason_name(MatchReason r) {
    switch (r) {
        case MatchReason::IdAndContent: return "id_and_content";
        case MatchReason::ContentOnly: return "content_only";
        case MatchReason::IdContentConflict: return "id_content_conflict";
        case MatchReason::NoMatch: return "no_match";
        case MatchReason::EmptyGeneration: return "empty_generation";
    }
    return "?";
}

// Lowercase, punctuation to spaces, collapsed whitespace. Idempotent.
inline std::string normalize_text(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            if (pending_space && !out.empty()) out.push_back(' ');
            pending_space = false;
            out.push_back(static_cast<char>(std::tolower(c)));
        } else {
            pending_space = true;
        }
    }
    return out;
}

inline void McQuestion::validate() const {
    if (answer_index < 0 || answer_index >= 4) throw DataError("mc: answer_index out of range");
    for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j)
            if (normalize_text(choices[static_cast<std::size_t>(i)]) ==
                normalize_text(choices[static_cast<std::size_t>(j)]))
                throw DataError("mc: choices not distinct after normalization");
}

namespace mc_detail {

// Token shaped like an option id: optional '(', a letter A-D, then one of
// ") . : ]" or nothing.
inline std::optional<int> parse_id_token(const std::string& token) {
    std::string t = token;
    if (!t.empty() && t.front() == '(') t.erase(t.begin());
    if (t.empty()) return std::nullopt;
    char c = static_cast<char>(std::tolower(static_cast<unsigned char>(t[0])));
    if (c < 'a' || c > 'd') return std::nullopt;
    if (t.size() == 1) return c - 'a';
    if (t.size() == 2 && (t[1] == ')' || t[1] == '.' || t[1] == ':' || t[1] == ']'))
        return c - 'a';
    return std::nullopt;
}

inline std::vector<std::string> whitespace_tokens(const std::string& text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (unsigned char c : text) {
        if (std::isspace(c)) {
            if (!cur.empty()) tokens.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(static_cast<char>(c));
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

}  // namespace mc_detail

// Leading token wins over trailing when both look like ids.
inline std::optional<int> detect_option_id(const std::string& raw_response) {
    auto tokens = mc_detail::whitespace_tokens(raw_response);
    if (tokens.empty()) return std::nullopt;
    if (auto id = mc_detail::parse_id_token(tokens.front())) return id;
    if (tokens.size() > 1)
        if (auto id = mc_detail::parse_id_token(tokens.back())) return id;
    return std::nullopt;
}

// Indices of options whose normalized text occurs in the normalized response;
// longer options claim their occurrences first.
inline std::vector<int> detect_contents(const std::string& raw_response,
                                        const std::array<std::string, 4>& choices) {
    std::string working = normalize_text(raw_response);
    std::vector<int> order = {0, 1, 2, 3};
    std::array<std::string, 4> norm;
    for (int i = 0; i < 4; ++i) norm[static_cast<std::size_t>(i)] = normalize_text(choices[static_cast<std::size_t>(i)]);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        const auto &na = norm[static_cast<std::size_t>(a)], &nb = norm[static_cast<std::size_t>(b)];
        if (na.size() != nb.size()) return na.size() > nb.size();
        return a < b;
    });
    std::vector<int> matched;
    for (int idx : order) {
        const std::string& needle = norm[static_cast<std::size_t>(idx)];
        if (needle.empty()) continue;
        bool found = false;
        for (std::size_t pos = working.find(needle); pos != std::string::npos;
             pos = working.find(needle, pos)) {
            found = true;
            working.replace(pos, needle.size(), "\x01");  // occlude for shorter options
            pos += 1;
        }
        if (found) matched.push_back(idx);
    }
    std::sort(matched.begin(), matched.end());
    return matched;
}

inline Verdict score_mc(const std::string& response, const McQuestion& q) {
    q.validate();
    if (normalize_text(response).empty())
        return {Outcome::Incorrect, MatchReason::EmptyGeneration, -1};

    std::optional<int> id = detect_option_id(response);
    std::vector<int> contents = detect_contents(response, q.choices);

    auto decide = [&](int option, MatchReason reason) {
        return Verdict{option == q.answer_index ? Outcome::Correct : Outcome::Incorrect, reason,
                       option};
    };

    if (!id) {
        if (contents.empty()) return {Outcome::Incorrect, MatchReason::NoMatch, -1};
        if (contents.size() == 1) return decide(contents[0], MatchReason::ContentOnly);
        return {Outcome::Incorrect, MatchReason::IdContentConflict, -1};
    }
    if (contents.empty()) return decide(*id, MatchReason::IdAndContent);
    if (std::find(contents.begin(), contents.end(), *id) != contents.end())
        return decide(*id, MatchReason::IdAndContent);
    return {Outcome::Incorrect, MatchReason::IdContentConflict, *id};
}

// ---------------------------------------------------------------------------
// accuracy aggregation
// ---------------------------------------------------------------------------

struct DomainStats {
    std::size_t correct = 0;
    std::size_t total = 0;
    double accuracy() const {
        return total == 0 ? 0.0 : 100.0 * static_cast<double>(correct) / static_cast<double>(total);
    }
};

struct AccuracyReport {
    std::map<std::string, DomainStats> per_domain;
    double micro = 0.0;  // over all records (the headline number)
    double macro = 0.0;  // mean of per-domain accuracies

    nlohmann::json to_json() const {
        nlohmann::json domains;
        for (const auto& [name, stats] : per_domain)
            domains[name] = {{"correct", stats.correct},
                             {"total", stats.total},
                             {"accuracy", stats.accuracy()}};
        return {{"per_domain", domains}, {"micro", micro}, {"macro", macro}};
    }
};

inline AccuracyReport aggregate_accuracy(
    const std::vector<std::pair<Verdict, std::string>>& records) {
    if (records.empty()) throw DataError("aggregate_accuracy: no records");
    AccuracyReport report;
    std::size_t correct = 0;
    for (const auto& [verdict, domain] : records) {
        auto& stats = report.per_domain[domain];
        stats.total += 1;
        if (verdict.outcome == Outcome::Correct) {
            stats.correct += 1;
            ++correct;
        }
    }
    report.micro = 100.0 * static_cast<double>(correct) / static_cast<double>(records.size());
    double sum = 0.0;
    for (const auto& [name, stats] : report.per_domain) sum += stats.accuracy();
    report.macro = sum / static_cast<double>(report.per_domain.size());
    return report;
}

}  // namespace alm
