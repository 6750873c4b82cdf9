// Copyright (c) 2026 almlab contributors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite. Each criterion prints exactly one [PASS]/[FAIL] line;
// the process exits nonzero if any criterion fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "almlab/ablate.hpp"
#include "almlab/grad_check.hpp"
#include "almlab/harness.hpp"
#include "almlab/judge.hpp"
#include "almlab/lora.hpp"
#include "almlab/synth.hpp"
#include "almlab/train.hpp"

using namespace alm;

namespace {

int g_failures = 0;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

void criterion(const std::string& name, const std::function<std::string()>& body) {
    auto start = Clock::now();
    try {
        std::string detail = body();
        std::printf("[PASS] %s (%s; %.1f s)\n", name.c_str(), detail.c_str(),
                    seconds_since(start));
    } catch (const std::exception& e) {
        ++g_failures;
        std::printf("[FAIL] %s: %s (%.1f s)\n", name.c_str(), e.what(), seconds_since(start));
    }
    std::fflush(stdout);
}

void expect(bool ok, const std::string& what) {
    if (!ok) throw std::runtime_error(what);
}

MelSpectrogram random_mel(std::size_t frames, std::size_t mels, std::uint64_t seed) {
    MelSpectrogram mel;
    mel.n_frames = frames;
    mel.n_mels = mels;
    mel.values.resize(frames * mels);
    Rng rng(seed);
    for (auto& v : mel.values) v = rng.normal();
    return mel;
}

ModelBundle<double> double_bundle(std::uint64_t seed) {
    EncoderConfig ec;
    ec.n_layers = 2;
    ec.d_model = 32;
    ec.n_heads = 2;
    ec.n_mels = 16;
    ec.max_frames = 64;
    ConnectorConfig cc;
    cc.d_in = 32;
    cc.d_lm = 64;
    LmConfig lc;
    lc.d_lm = 64;
    lc.n_layers = 2;
    lc.n_heads = 2;
    lc.max_seq_len = 128;
    return ModelBundle<double>::init(ec, cc, lc, seed);
}

// ---------------------------------------------------------------------------
// 1. gradient suite
// ---------------------------------------------------------------------------

std::string gradient_suite() {
    auto start = Clock::now();
    double worst = 0.0;
    GradCheckOptions opt;
    opt.tolerance = 1e-4;

    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        // projector
        {
            ConnectorConfig cc;
            cc.reduction = Reduce::None;
            cc.d_in = 8;
            cc.d_lm = 16;
            Rng rng(seed);
            auto params = ProjectorParams<double>::init(cc, rng);
            auto x = Tensor<double>::randn({4, 8}, rng, 1.0);
            auto probe = Tensor<double>::randn({4, 16}, rng, 1.0);
            NamedParams named;
            params.visit_params("projector", [&](const std::string& n, Tensor<double>& t) {
                named.emplace_back(n, t);
            });
            GradCheckOptions po = opt;
            po.max_entries_per_param = 24;
            po.seed = seed;
            auto report = grad_check(
                [&] { return sum_all(mul(project(x, params), probe)); }, named, po);
            expect(report.passed, "projector grad check failed, rel err " +
                                      std::to_string(report.max_rel_error));
            worst = std::max(worst, report.max_rel_error);
        }

        // encoder 2 layers, d=32
        {
            EncoderConfig ec;
            ec.n_layers = 2;
            ec.d_model = 32;
            ec.n_heads = 2;
            ec.n_mels = 16;
            ec.max_frames = 32;
            Rng rng(seed + 100);
            auto params = EncoderParams<double>::init(ec, rng);
            MelSpectrogram mel = random_mel(10, 16, seed + 200);
            Rng probe_rng(seed + 250);
            auto probe = Tensor<double>::randn({5, 32}, probe_rng, 1.0);
            NamedParams named;
            params.visit_params("encoder", [&](const std::string& n, Tensor<double>& t) {
                named.emplace_back(n, t);
            });
            GradCheckOptions eo = opt;
            eo.max_entries_per_param = 4;
            eo.seed = seed;
            eo.step = 2e-4;  // balances cancellation noise against curvature for the deep stack
            auto report = grad_check(
                [&] {
                    ForwardCtx ctx;
                    auto f = encode(mel, ec, params, ctx);
                    return sum_all(mul(f.final_layer(), probe));
                },
                named, eo);
            expect(report.passed, "encoder grad check failed, rel err " +
                                      std::to_string(report.max_rel_error));
            worst = std::max(worst, report.max_rel_error);
        }

        // LM 2 layers, d=64, through merge + cross_entropy
        {
            LmConfig lc;
            lc.d_lm = 64;
            lc.n_layers = 2;
            lc.n_heads = 2;
            lc.max_seq_len = 64;
            Rng rng(seed + 300);
            auto params = LmParams<double>::init(lc, rng);
            auto audio = Tensor<double>::randn({5, 64}, rng, 1.0, true);
            std::vector<int> ids = {Tokenizer::kBos, 'q', Tokenizer::kAudio, '?',
                                    Tokenizer::kAssistant, 'y', 'e', 's', Tokenizer::kEos};
            NamedParams named;
            named.emplace_back("audio", audio);
            params.visit_params("lm", [&](const std::string& n, Tensor<double>& t) {
                named.emplace_back(n, t);
            });
            GradCheckOptions lo = opt;
            lo.max_entries_per_param = 4;
            lo.seed = seed;
            lo.step = 2e-4;  // balances cancellation noise against curvature for the deep stack
            auto report = grad_check(
                [&] {
                    ForwardCtx ctx;
                    auto seq = merge_embeddings(audio, ids, params, lc, CompletionSpan{5, 4});
                    auto logits = lm_forward(seq, params, lc, ctx);
                    std::vector<int> targets(seq.total_len() - 1, 0);
                    std::vector<std::uint8_t> mask(seq.total_len() - 1, 0);
                    for (std::size_t t = 0; t + 1 < seq.total_len(); ++t) {
                        targets[t] = std::max(0, seq.merged_ids[t + 1]);
                        mask[t] = seq.loss_mask[t + 1];
                    }
                    return cross_entropy(slice_rows(logits, 0, seq.total_len() - 1), targets,
                                         mask);
                },
                named, lo);
            expect(report.passed,
                   "lm grad check failed, rel err " + std::to_string(report.max_rel_error));
            worst = std::max(worst, report.max_rel_error);
        }

        // LoRA-adapted attention (A and B randomized so both carry signal)
        {
            Rng rng(seed + 400);
            auto attn = AttentionParams<double>::init(16, rng);
            LoraConfig lcfg;
            lcfg.rank = 4;
            lcfg.alpha = 8.0;
            lcfg.dropout_p = 0.0;
            alm::detail::attach_adapter(attn.q, lcfg, rng);
            alm::detail::attach_adapter(attn.v, lcfg, rng);
            attn.q.lora->b = Tensor<double>::randn({4, 16}, rng, 0.3, true);
            attn.v.lora->b = Tensor<double>::randn({4, 16}, rng, 0.3, true);
            auto x = Tensor<double>::randn({6, 16}, rng, 1.0);
            auto probe = Tensor<double>::randn({6, 16}, rng, 1.0);
            NamedParams named = {{"q.lora_a", attn.q.lora->a},
                                 {"q.lora_b", attn.q.lora->b},
                                 {"v.lora_a", attn.v.lora->a},
                                 {"v.lora_b", attn.v.lora->b}};
            auto report = grad_check(
                [&] {
                    ForwardCtx ctx;
                    auto y = attention(attn, x, 2, true, nullptr, ctx);
                    return sum_all(mul(y, probe));
                },
                named, opt);
            expect(report.passed,
                   "lora grad check failed, rel err " + std::to_string(report.max_rel_error));
            worst = std::max(worst, report.max_rel_error);
        }

        // full merged pipeline: mel -> encoder -> connector -> merge -> LM -> NLL
        {
            auto bundle = double_bundle(seed + 500);
            MelSpectrogram mel = random_mel(12, 16, seed + 600);
            std::vector<int> ids = {Tokenizer::kBos,       Tokenizer::kUser, 'h', 'i',
                                    Tokenizer::kAudio,     '?',              Tokenizer::kAssistant,
                                    'o', 'k',              Tokenizer::kEos};
            NamedParams named;
            bundle.for_each_param([&](const std::string& n, Tensor<double>& t) {
                named.emplace_back(n, t);
            });
            GradCheckOptions fo = opt;
            fo.max_entries_per_param = 3;
            fo.seed = seed;
            fo.step = 2e-4;  // balances cancellation noise against curvature for the deep stack
            auto report = grad_check(
                [&] {
                    ForwardCtx ctx;
                    MergedSequence<double> seq;
                    auto logits =
                        bundle.logits(mel, ids, CompletionSpan{7, 3}, ctx, nullptr, &seq);
                    std::vector<int> targets(seq.total_len() - 1, 0);
                    std::vector<std::uint8_t> mask(seq.total_len() - 1, 0);
                    for (std::size_t t = 0; t + 1 < seq.total_len(); ++t) {
                        targets[t] = std::max(0, seq.merged_ids[t + 1]);
                        mask[t] = seq.loss_mask[t + 1];
                    }
                    return cross_entropy(slice_rows(logits, 0, seq.total_len() - 1), targets,
                                         mask);
                },
                named, fo);
            expect(report.passed, "full pipeline grad check failed, rel err " +
                                      std::to_string(report.max_rel_error));
            worst = std::max(worst, report.max_rel_error);
        }
    }
    double elapsed = seconds_since(start);
    expect(elapsed < 120.0, "gradient suite exceeded 2 minutes");
    char buf[96];
    std::snprintf(buf, sizeof(buf), "5 seeds x 5 targets, max rel err %.2e <= 1e-4", worst);
    return buf;
}

// ---------------------------------------------------------------------------
// 2. rate laws
// ---------------------------------------------------------------------------

std::string rate_law_suite() {
    for (int sec = 1; sec <= 8; ++sec) {
        AudioInput tone = synth::tone(330.0, static_cast<double>(sec));
        MelSpectrogram mel = log_mel(tone, 16);
        expect(mel.n_frames == static_cast<std::size_t>(sec * 100),
               "mel frame rate violated at " + std::to_string(sec) + " s");
        Index enc = EncoderConfig::out_tokens(mel.n_frames);
        expect(enc == static_cast<Index>(sec * 50),
               "encoder token rate violated at " + std::to_string(sec) + " s");
        ConnectorConfig cc;
        cc.reduction = Reduce::Pool;
        cc.k = 2;
        cc.d_in = 8;
        cc.d_lm = 8;
        expect(cc.out_tokens(enc) == static_cast<Index>(sec * 25),
               "pooled token rate violated at " + std::to_string(sec) + " s");
    }

    Rng rng(0);
    for (Index t = 1; t <= 64; ++t) {
        auto x = Tensor<float>::randn({t, 3}, rng, 1.0f);
        for (Index k : {1, 2, 4, 8}) {
            Index expect_rows = (t + k - 1) / k;
            expect(pool(x, k).rows() == expect_rows, "pool length law violated");
            expect(stack(x, k).rows() == expect_rows, "stack length law violated");
        }
    }
    return "100 -> 50 -> 25 tok/s exact for 1-8 s; ceil(T/k) exhaustive for T in [1,64]";
}

// ---------------------------------------------------------------------------
// 3. LoRA identity + frozen-base gradients
// ---------------------------------------------------------------------------

std::string lora_identity() {
    EncoderConfig ec;
    ec.n_layers = 2;
    ec.d_model = 32;
    ec.n_heads = 2;
    ec.n_mels = 16;
    ec.max_frames = 64;
    ConnectorConfig cc;
    cc.d_in = 32;
    cc.d_lm = 64;
    LmConfig lc;
    lc.d_lm = 64;
    lc.n_layers = 2;
    lc.n_heads = 2;
    lc.max_seq_len = 128;
    auto bundle = ModelBundle<float>::init(ec, cc, lc, 3);
    MelSpectrogram mel = random_mel(16, 16, 4);
    std::vector<int> ids = {Tokenizer::kBos, Tokenizer::kAudio, 'h', 'i', '?'};

    auto forward = [&]() {
        NoGradGuard ng;
        ForwardCtx ctx;
        return bundle.logits(mel, ids, std::nullopt, ctx).data();
    };
    auto before = forward();

    LoraConfig lora;  // rank 8, alpha 16, dropout 0.05
    expect(lora.rank == 8 && lora.alpha == 16.0 && lora.dropout_p == 0.05,
           "default adapter config drifted");
    attach_lora(bundle, lora, 9);
    auto after = forward();
    double worst = 0.0;
    for (std::size_t i = 0; i < before.size(); ++i)
        worst = std::max(worst, std::abs(double(before[i]) - double(after[i])));
    expect(worst <= 1e-6, "adapter attachment moved outputs by " + std::to_string(worst));

    // frozen-base gradients are bitwise zero under the default regime
    set_trainable(bundle, FreezeConfig{});
    bundle.zero_grads();
    ForwardCtx ctx;
    ctx.training = false;  // keep dropout out of the check
    auto logits = bundle.logits(mel, ids, std::nullopt, ctx);
    std::vector<int> targets(logits.rows(), 'x');
    std::vector<std::uint8_t> mask(logits.rows(), 1);
    cross_entropy(logits, targets, mask).backward();
    std::size_t frozen_checked = 0;
    bundle.for_each_param([&](const std::string& name, Tensor<float>& t) {
        bool trainable = t.requires_grad();
        if (trainable) return;
        ++frozen_checked;
        for (float g : t.grad())
            expect(g == 0.0f, "nonzero gradient on frozen '" + name + "'");
    });
    expect(frozen_checked > 0, "no frozen parameters found");
    char buf[96];
    std::snprintf(buf, sizeof(buf), "identity diff %.1e <= 1e-6; %zu frozen tensors bitwise zero",
                  worst, frozen_checked);
    return buf;
}

// ---------------------------------------------------------------------------
// 4. overfit oracle
// ---------------------------------------------------------------------------

struct OverfitOutcome {
    std::vector<double> losses;
    std::vector<std::string> answers;
    double final_loss = 0.0;
    double accuracy = 0.0;
};

OverfitOutcome run_overfit(std::uint64_t seed) {
    EncoderConfig ec;
    ec.n_layers = 2;
    ec.d_model = 32;
    ec.n_heads = 2;
    ec.n_mels = 80;
    ec.max_frames = 100;
    ConnectorConfig cc;
    cc.d_in = 32;
    cc.d_lm = 64;
    LmConfig lc;
    lc.d_lm = 64;
    lc.n_layers = 2;
    lc.n_heads = 2;
    lc.max_seq_len = 384;
    auto bundle = ModelBundle<float>::init(ec, cc, lc, seed);

    SynthSpec spec;
    spec.n_samples = 32;
    spec.seconds = 1.0;
    spec.mc_fraction = 1.0;
    auto data = synth_dataset(spec, 17);

    CollateConfig ccfg;
    ccfg.audio_max_seconds = 1.0;

    TrainConfig tcfg;
    tcfg.epochs = 150;  // 32 samples / batch 16 = 2 steps per epoch -> 300 steps
    tcfg.batch_size = 16;
    tcfg.lr_max = 5e-3;
    tcfg.seed = seed;

    auto result = train(tcfg, data, bundle, ccfg);

    OverfitOutcome out;
    for (const auto& row : result.curve) out.losses.push_back(row.loss);
    out.final_loss = result.curve.back().loss;

    GenerationConfig gen;
    gen.temperature = 0.0;
    gen.max_new_tokens = 16;
    gen.seed = seed;
    int correct = 0;
    for (const auto& sample : data) {
        std::string response = generate_response(bundle, sample, gen, ccfg);
        out.answers.push_back(response);
        Verdict v = score_mc(response, McQuestion::from_sample(sample));
        if (v.outcome == Outcome::Correct) ++correct;
    }
    out.accuracy = 100.0 * correct / static_cast<double>(data.size());
    return out;
}

std::string overfit_oracle() {
    auto start = Clock::now();
    OverfitOutcome a = run_overfit(0);
    expect(a.final_loss < 0.1,
           "train NLL " + std::to_string(a.final_loss) + " did not reach < 0.1 in 300 steps");
    expect(a.accuracy == 100.0,
           "self-set accuracy " + std::to_string(a.accuracy) + "% != 100%");

    OverfitOutcome b = run_overfit(0);
    expect(a.losses.size() == b.losses.size(), "curve lengths differ across same-seed runs");
    for (std::size_t i = 0; i < a.losses.size(); ++i)
        expect(a.losses[i] == b.losses[i], "loss curves differ at step " + std::to_string(i));
    expect(a.answers == b.answers, "generated answers differ across same-seed runs");

    double elapsed = seconds_since(start);
    expect(elapsed < 300.0, "overfit pair exceeded 5 minutes");
    char buf[128];
    std::snprintf(buf, sizeof(buf),
                  "300 steps: NLL %.4f < 0.1; accuracy 100%%; two runs bit-identical", a.final_loss);
    return buf;
}

// ---------------------------------------------------------------------------
// 5. scorer fixtures
// ---------------------------------------------------------------------------

std::string scorer_fixtures() {
    McQuestion q{"What instrument is most prominent in this piece?",
                 {"drums", "voice", "electric guitar", "bass"},
                 2,
                 "music"};
    expect(score_mc("electric guitar", q).outcome == Outcome::Correct,
           "content-only correct answer rejected");
    expect(score_mc("C) drums", q).outcome == Outcome::Incorrect,
           "conflicting id/content accepted");
    Verdict empty = score_mc("", q);
    expect(empty.outcome == Outcome::Incorrect && empty.reason == MatchReason::EmptyGeneration,
           "empty generation not scored incorrect");

    // random-guess accuracy on a balanced synthetic 4-choice set
    Rng rng(123);
    std::vector<std::pair<Verdict, std::string>> records;
    const char* domains[] = {"sound", "music", "speech"};
    for (int i = 0; i < 10000; ++i) {
        McQuestion mc{"?", {"aa", "bb", "cc", "dd"},
                      static_cast<int>(rng.uniform_int(0, 3)), domains[i % 3]};
        std::string guess(1, static_cast<char>('A' + rng.uniform_int(0, 3)));
        records.emplace_back(score_mc(guess, mc), mc.domain);
    }
    auto report = aggregate_accuracy(records);
    expect(report.micro >= 23.0 && report.micro <= 27.0,
           "random-guess accuracy " + std::to_string(report.micro) + " outside 25 +- 2");

    char buf[96];
    std::snprintf(buf, sizeof(buf), "3 published cases exact; random guess %.2f%% in 25 +- 2",
                  report.micro);
    return buf;
}

// ---------------------------------------------------------------------------
// 6. projector parameter accounting
// ---------------------------------------------------------------------------

std::string projector_accounting() {
    ConnectorConfig big;
    big.reduction = Reduce::Pool;
    big.k = 2;
    big.d_in = 1024;
    big.d_lm = 3072;
    Rng rng(0);
    auto params = ProjectorParams<float>::init(big, rng);
    std::size_t count = 0;
    params.visit_params("projector",
                        [&](const std::string&, Tensor<float>& t) { count += t.numel(); });
    double millions = static_cast<double>(count) / 1e6;
    expect(std::abs(millions - 12.58) <= 0.1,
           "1024->3072 projector has " + std::to_string(millions) + "M params, expected 12.58 +- 0.1M");

    // closed-form check on the toy bundle
    auto bundle = double_bundle(1);
    auto counts = count_params(bundle);
    auto block = [](std::size_t d) {
        return 4 * (d * d + d) + 4 * d + (d * 4 * d + 4 * d) + (4 * d * d + d);
    };
    std::size_t enc_expected =
        (3 * 16 * 32 + 32) + (3 * 32 * 32 + 32) + 2 * block(32);
    std::size_t proj_expected = 2 * 32 + (32 * 64 + 64) + (64 * 64 + 64) + 2 * 64;
    std::size_t lm_expected = 263 * 64 + 128 * 64 + 2 * block(64) + 2 * 64 + (64 * 263 + 263);
    expect(counts.encoder == enc_expected, "encoder count mismatch");
    expect(counts.projector == proj_expected, "projector count mismatch");
    expect(counts.lm == lm_expected, "lm count mismatch");
    expect(counts.total == counts.encoder + counts.projector + counts.lm, "total != sum");

    char buf[96];
    std::snprintf(buf, sizeof(buf), "%.3fM in 12.58 +- 0.1M; toy counts match closed form",
                  millions);
    return buf;
}

// ---------------------------------------------------------------------------
// 7. judge protocol (offline)
// ---------------------------------------------------------------------------

std::string judge_protocol() {
    // swapped-order mean
    auto stub = StubJudgeClient::cycling({"7 7", "9 9"});
    double pair = judge_pair("q", "ref", "cand", stub);
    expect(pair == 8.0, "swapped-order mean wrong");

    // the two calls provably swap the answers
    int calls = 0;
    StubJudgeClient order_stub([&](const ChatRequest& req) {
        const std::string& user = req.messages[1].content;
        std::size_t a2 = user.find("[Assistant 2]");
        std::size_t cand = user.find("THE_CANDIDATE");
        ++calls;
        bool candidate_second = cand > a2;
        expect(calls == 1 ? candidate_second : !candidate_second,
               "answer order did not swap between calls");
        return std::string("5 5");
    });
    judge_pair("q", "THE_REFERENCE", "THE_CANDIDATE", order_stub);
    expect(calls == 2, "expected exactly two judge calls");

    // parse-failure degradation: flagged item, run continues
    std::vector<ChatEvalItem> items = {{"ok", "q", "r", "sound"}, {"bad", "q", "r", "music"}};
    std::map<std::string, std::string> responses = {{"ok", "fine"}, {"bad", "broken"}};
    StubJudgeClient flaky([](const ChatRequest& req) {
        if (req.messages[1].content.find("broken") != std::string::npos)
            return std::string("unparseable");
        return std::string("6 6");
    });
    auto degraded = run_chat_eval(items, responses, flaky, 1, 1);
    expect(degraded.failed_items == std::vector<std::string>{"bad"}, "failure not flagged");
    expect(degraded.trial_means[0] == 6.0, "run did not continue past the failure");

    // 3-trial median with per-trial scores {6, 7, 5}
    std::vector<std::string> script;
    for (const char* s : {"6 6", "7 7", "5 5"})
        for (int i = 0; i < 4; ++i) script.emplace_back(s);
    auto trio = StubJudgeClient::cycling(script);
    auto report = run_chat_eval(items, responses, trio, 3, 1);
    expect(report.trial_means == std::vector<double>{6.0, 7.0, 5.0}, "trial means wrong");
    expect(report.median == 6.0, "median of {6,7,5} should be 6");
    return "swapped-order mean, parse-failure degradation, and 3-trial median verified offline";
}

// ---------------------------------------------------------------------------
// 8. schedule fixture
// ---------------------------------------------------------------------------

std::string schedule_fixture() {
    TrainConfig cfg;  // lr_max 2e-4, warmup_ratio 0.01
    int total = 1000;
    int warmup = 10;
    expect(lr_at(0, total, cfg) == 0.0, "lr_at(0) != 0");
    expect(std::abs(lr_at(warmup, total, cfg) - 2e-4) < 1e-18, "lr at warmup end != 2e-4");
    expect(lr_at(total, total, cfg) <= 1e-12, "lr at total_steps not ~0");
    return "lr(0)=0, lr(warmup)=2e-4, lr(total)<=1e-12";
}

// ---------------------------------------------------------------------------
// 9. ablation harness
// ---------------------------------------------------------------------------

std::string ablation_harness() {
    RunConfig base;
    base.encoder.n_layers = 12;  // supports layer aggregation every 3/6/12
    base.encoder.d_model = 16;
    base.encoder.n_heads = 2;
    base.encoder.n_mels = 16;
    base.encoder.max_frames = 120;
    base.connector.reduction = Reduce::Pool;
    base.connector.k = 2;
    base.connector.d_in = 16;
    base.connector.d_lm = 32;
    base.lm.d_lm = 32;
    base.lm.n_layers = 1;
    base.lm.n_heads = 2;
    base.lm.max_seq_len = 320;
    base.lora = LoraConfig{};
    base.train.epochs = 1;
    base.train.batch_size = 4;
    base.train.lr_max = 1e-3;
    base.data.audio_max_seconds = 1.0;
    base.data.n_mels = 16;
    base.generate.temperature = 0.0;
    base.generate.max_new_tokens = 12;
    base.seed = 0;

    SynthSpec spec;
    spec.n_samples = 8;
    spec.seconds = 1.0;
    spec.mc_fraction = 1.0;
    auto train_data = synth_dataset(spec, 1);
    auto eval_data = synth_dataset(spec, 2);

    auto out_dir = (std::filesystem::temp_directory_path() / "almlab_acceptance_ablate").string();
    std::filesystem::remove_all(out_dir);
    auto summary = run_ablation<float>(base, ablation_grid({}), train_data, eval_data, out_dir);

    expect(summary.rows.size() == 4 + 6 + 3 + 1, "grid is missing variants");
    std::set<std::string> dims;
    for (const auto& row : summary.rows) dims.insert(row.dimension);
    expect(dims == std::set<std::string>{"freeze", "layer_agg", "stack", "stages"},
           "grid dimensions incomplete");
    std::string table = summary.to_table();
    expect(table.find("base (absolute)") != std::string::npos, "table missing base row");
    expect(table.find("stack: k=8") != std::string::npos, "table missing stack rows");
    expect(table.find("layer_agg: after_every12") != std::string::npos,
           "table missing aggregation rows");
    expect(table.find("freeze: frozen_lm") != std::string::npos, "table missing freeze rows");
    expect(table.find("stages: two_stage") != std::string::npos, "table missing stages row");
    for (const auto& row : summary.rows) {
        std::filesystem::path run_dir =
            std::filesystem::path(out_dir) / (row.dimension + "__" + row.name);
        expect(std::filesystem::exists(run_dir / "report.json"),
               "missing report for " + row.name);
        expect(std::filesystem::exists(run_dir / "losses.csv"), "missing losses for " + row.name);
    }
    return "14 variants + base ran end to end; relative-delta table emitted";
}

}  // namespace

int main() {
    std::printf("acceptance suite\n");
    criterion("gradient-suite", gradient_suite);
    criterion("rate-law-suite", rate_law_suite);
    criterion("lora-identity", lora_identity);
    criterion("overfit-oracle", overfit_oracle);
    criterion("scorer-fixtures", scorer_fixtures);
    criterion("projector-parameter-accounting", projector_accounting);
    criterion("judge-protocol-stub", judge_protocol);
    criterion("schedule-fixture", schedule_fixture);
    criterion("ablation-harness", ablation_harness);
    if (g_failures > 0) {
        std::printf("%d criterion(s) failed\n", g_failures);
        return 1;
    }
    std::printf("all criteria passed\n");
    return 0;
}
