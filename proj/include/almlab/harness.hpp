// Copyright (c) 2026 almlab contributors
// SPDX-License-Identifier: Apache-2.0
//
// Generation + scoring harness shared by the CLI and the ablation runner.

#pragma once

#include <string>
#include <vector>

#include "almlab/bundle.hpp"
#include "almlab/data.hpp"
#include "almlab/eval.hpp"

namespace alm {

template <typename T>
std::string generate_response(ModelBundle<T>& bundle, const Sample& sample,
                              const GenerationConfig& gen, const CollateConfig& ccfg) {
    Tokenizer tok;
    AudioInput audio = load_audio_field(sample.audio, ccfg.base_dir);
    MelSpectrogram mel = log_mel(pad_or_trim(audio, ccfg.audio_max_seconds),
                                 static_cast<std::size_t>(ccfg.n_mels));
    RenderedPrompt prompt = render_prompt(sample, tok, ccfg.system_text,
                                          /*include_completion=*/false);
    NoGradGuard ng;
    ForwardCtx ctx;
    Tensor<T> audio_emb = bundle.audio_embeddings(mel, ctx);
    std::vector<int> ids = generate(prompt.ids, audio_emb, gen, bundle.lm, bundle.lm_cfg);
    return tok.decode_text(ids);
}

struct McEvalRow {
    std::string id;
    std::string response;
    Verdict verdict;
    std::string domain;
};

template <typename T>
struct McEvalResult {
    AccuracyReport report;
    std::vector<McEvalRow> rows;

    nlohmann::json to_json() const {
        nlohmann::json items = nlohmann::json::array();
        for (const auto& row : rows)
            items.push_back({{"id", row.id},
                             {"response", row.response},
                             {"correct", row.verdict.outcome == Outcome::Correct},
                             {"reason", reason_name(row.verdict.reason)},
                             {"domain", row.domain}});
        nlohmann::json j = report.to_json();
        j["items"] = items;
        return j;
    }
};

// Scores every multiple-choice sample in the set; free-form samples are
// skipped.
template <typename T>
McEvalResult<T> run_mc_eval(ModelBundle<T>& bundle, const std::vector<Sample>& samples,
                            const GenerationConfig& gen, const CollateConfig& ccfg) {
    McEvalResult<T> result;
    std::vector<std::pair<Verdict, std::string>> records;
    for (const auto& sample : samples) {
        if (!sample.choices) continue;
        McQuestion q = McQuestion::from_sample(sample);
        GenerationConfig g = gen;
        g.seed = mix_seed(gen.seed, std::hash<std::string>{}(sample.id));
        std::string response = generate_response(bundle, sample, g, ccfg);
        Verdict verdict = score_mc(response, q);
        records.emplace_back(verdict, sample.domain);
        result.rows.push_back({sample.id, response, verdict, sample.domain});
    }
    if (records.empty()) throw DataError("eval-mc: no multiple-choice samples in the set");
    result.report = aggregate_accuracy(records);
    return result;
}

}  // namespace alm
