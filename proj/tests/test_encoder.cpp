// Copyright (c) 2026 almlab contributors
// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch.hpp>

#include "almlab/encoder.hpp"
#include "almlab/grad_check.hpp"
#include "helpers.hpp"

using namespace alm;

namespace {

MelSpectrogram random_mel(std::size_t frames, std::size_t mels, std::uint64_t seed) {
    MelSpectrogram mel;
    mel.n_frames = frames;
    mel.n_mels = mels;
    mel.values.resize(frames * mels);
    Rng rng(seed);
    for (auto& v : mel.values) v = rng.normal();
    return mel;
}

}  // namespace

TEST_CASE("encoder config invariants") {
    EncoderConfig cfg;
    cfg.n_layers = 0;
    CHECK_THROWS_AS(cfg.validate(), UsageError);
    cfg.n_layers = 1;
    cfg.d_model = 30;
    cfg.n_heads = 4;  // not divisible
    CHECK_THROWS_AS(cfg.validate(), UsageError);
}

TEST_CASE("encode halves the frame rate and returns every layer") {
    EncoderConfig cfg;
    cfg.n_layers = 2;
    cfg.d_model = 16;
    cfg.n_heads = 2;
    cfg.n_mels = 12;
    cfg.max_frames = 400;
    Rng rng(0);
    auto params = EncoderParams<float>::init(cfg, rng);
    ForwardCtx ctx;

    SECTION("400 frames -> every layer [200, d]") {
        auto features = encode(random_mel(400, 12, 1), cfg, params, ctx);
        REQUIRE(features.per_layer.size() == 3);
        for (const auto& layer : features.per_layer) {
            CHECK(layer.rows() == 200);
            CHECK(layer.cols() == 16);
        }
    }
    SECTION("odd frame counts round up") {
        auto features = encode(random_mel(101, 12, 2), cfg, params, ctx);
        CHECK(features.final_layer().rows() == 51);
    }
    SECTION("frame overflow is rejected") {
        CHECK_THROWS_AS(encode(random_mel(401, 12, 3), cfg, params, ctx), UsageError);
    }
    SECTION("mel band mismatch is rejected") {
        CHECK_THROWS_AS(encode(random_mel(100, 13, 4), cfg, params, ctx), ShapeError);
    }
}

TEST_CASE("30 s of audio becomes 1500 encoder tokens (50/s)") {
    EncoderConfig cfg;
    cfg.n_layers = 1;
    cfg.d_model = 8;
    cfg.n_heads = 2;
    cfg.n_mels = 8;
    cfg.max_frames = 3000;
    Rng rng(0);
    auto params = EncoderParams<float>::init(cfg, rng);
    ForwardCtx ctx;
    auto features = encode(random_mel(3000, 8, 5), cfg, params, ctx);
    CHECK(features.final_layer().rows() == 1500);
}

TEST_CASE("token-rate law: T_enc / seconds == 50 for 1..8 s") {
    for (int sec = 1; sec <= 8; ++sec) {
        Index frames = static_cast<Index>(sec) * 100;
        CHECK(EncoderConfig::out_tokens(frames) == static_cast<Index>(sec) * 50);
    }
}

TEST_CASE("batch order permutes outputs identically") {
    EncoderConfig cfg;
    cfg.n_layers = 1;
    cfg.d_model = 8;
    cfg.n_heads = 2;
    cfg.n_mels = 8;
    cfg.max_frames = 100;
    Rng rng(1);
    auto params = EncoderParams<float>::init(cfg, rng);
    ForwardCtx ctx;
    std::vector<MelSpectrogram> batch = {random_mel(40, 8, 10), random_mel(40, 8, 11),
                                         random_mel(40, 8, 12)};
    std::vector<std::vector<float>> forward_order, reverse_order(3);
    for (const auto& mel : batch)
        forward_order.push_back(encode(mel, cfg, params, ctx).final_layer().data());
    for (int i = 2; i >= 0; --i)
        reverse_order[static_cast<std::size_t>(i)] =
            encode(batch[static_cast<std::size_t>(i)], cfg, params, ctx).final_layer().data();
    CHECK(forward_order == reverse_order);
}

TEST_CASE("encoder forward passes the finite-difference check") {
    EncoderConfig cfg;
    cfg.n_layers = 2;
    cfg.d_model = 32;
    cfg.n_heads = 2;
    cfg.n_mels = 8;
    cfg.max_frames = 50;
    Rng rng(7);
    auto params = EncoderParams<double>::init(cfg, rng);
    MelSpectrogram mel = random_mel(9, 8, 21);

    NamedParams named;
    params.visit_params("encoder", [&](const std::string& name, Tensor<double>& t) {
        named.emplace_back(name, t);
    });
    // linear probe keeps the finite differences well conditioned
    auto probe = testutil::random_tensor<double>({5, 32}, 77);
    auto fn = [&]() {
        ForwardCtx ctx;
        auto features = encode(mel, cfg, params, ctx);
        return sum_all(mul(features.final_layer(), probe));
    };
    GradCheckOptions opt;
    opt.tolerance = 1e-4;
    opt.max_entries_per_param = 6;
    // deep composition: tiny per-weight derivatives under an O(10) loss make
    // h = 1e-5 roundoff-dominated in double; a larger step stays far below
    // the truncation floor
    opt.step = 3e-4;
    auto report = grad_check(fn, named, opt);
    INFO("max rel err " << report.max_rel_error);
    CHECK(report.passed);
}
