// Copyright (c) 2026 almlab contributors
// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch.hpp>

#include "almlab/connector.hpp"
#include "almlab/grad_check.hpp"
#include "helpers.hpp"

using namespace alm;

TEST_CASE("pool fixtures") {
    auto x = Tensor<float>::from({4, 1}, {1, 2, 3, 4});
    CHECK(pool(x, 2).data() == std::vector<float>{1.5f, 3.5f});
    CHECK(pool(testutil::random_tensor<float>({1500, 4}, 0), 2).rows() == 750);
    auto odd = Tensor<float>::from({5, 1}, {1, 2, 3, 4, 9});
    auto pooled = pool(odd, 2);
    REQUIRE(pooled.rows() == 3);
    CHECK(pooled.data()[2] == 9.0f);
}

TEST_CASE("stack fixtures") {
    auto x = Tensor<float>::from({4, 2}, {1, 2, 3, 4, 5, 6, 7, 8});
    auto stacked = stack(x, 2);
    REQUIRE(stacked.shape() == std::vector<Index>{2, 4});
    CHECK(stacked.data() == std::vector<float>{1, 2, 3, 4, 5, 6, 7, 8});
    CHECK(stack(x, 1).data() == x.data());
    auto tail = stack(Tensor<float>::from({3, 2}, {1, 2, 3, 4, 5, 6}), 2);
    CHECK(tail.data() == std::vector<float>{1, 2, 3, 4, 5, 6, 0, 0});
    CHECK_THROWS_AS(stack(x, 3), UsageError);
}

TEST_CASE("length law ceil(T/k) exhaustively for T in [1,64], k in {1,2,4,8}") {
    for (Index t = 1; t <= 64; ++t) {
        auto x = testutil::random_tensor<float>({t, 3}, t);
        for (Index k : {1, 2, 4, 8}) {
            Index expect = (t + k - 1) / k;
            CHECK(pool(x, k).rows() == expect);
            CHECK(stack(x, k).rows() == expect);
        }
    }
}

TEST_CASE("project applies LN -> fc1 -> GELU -> fc2 -> LN in order") {
    ConnectorConfig cfg;
    cfg.reduction = Reduce::None;
    cfg.d_in = 8;
    cfg.d_lm = 16;
    Rng rng(3);
    auto params = ProjectorParams<float>::init(cfg, rng);

    SECTION("zeroed tail affine short-circuits to the constant beta2") {
        std::fill(params.w2.data().begin(), params.w2.data().end(), 0.0f);
        std::fill(params.b2.data().begin(), params.b2.data().end(), 0.0f);
        std::fill(params.ln2_g.data().begin(), params.ln2_g.data().end(), 0.0f);
        std::fill(params.ln2_b.data().begin(), params.ln2_b.data().end(), 4.5f);
        auto out = project(testutil::random_tensor<float>({5, 8}, 1), params);
        for (float v : out.data()) CHECK(v == Approx(4.5f));
    }

    SECTION("width mismatch is rejected") {
        CHECK_THROWS_AS(project(testutil::random_tensor<float>({5, 9}, 2), params), ShapeError);
    }

    SECTION("permutation equivariance across frames") {
        auto x = testutil::random_tensor<float>({6, 8}, 9);
        auto y = project(x, params);
        // reverse the frames
        std::vector<float> reversed(x.numel());
        for (Index r = 0; r < 6; ++r)
            std::copy_n(x.data().data() + r * 8, 8, reversed.data() + (5 - r) * 8);
        auto yr = project(Tensor<float>::from({6, 8}, std::move(reversed)), params);
        for (Index r = 0; r < 6; ++r)
            for (Index c = 0; c < 16; ++c) CHECK(y.at(r, c) == yr.at(5 - r, c));
    }
}

TEST_CASE("projector parameter count matches the published 1024->3072 scale") {
    // ln1 (2*1024) + fc1 (1024*3072 + 3072) + fc2 (3072*3072 + 3072) + ln2 (2*3072)
    ConnectorConfig cfg;
    cfg.reduction = Reduce::Pool;
    cfg.k = 2;
    cfg.d_in = 1024;
    cfg.d_lm = 3072;
    std::size_t expected = 2 * 1024 + (1024 * 3072 + 3072) + (3072 * 3072 + 3072) + 2 * 3072;
    CHECK(expected == 12597248);  // ~12.6M, the "12M" projector entry
    std::size_t counted = 0;
    Rng rng(0);
    auto params = ProjectorParams<double>::init(cfg, rng);
    params.visit_params("projector", [&](const std::string&, Tensor<double>& t) {
        counted += t.numel();
    });
    CHECK(counted == expected);
}

TEST_CASE("projector passes the finite-difference check on a [4,8] -> [4,16] map") {
    ConnectorConfig cfg;
    cfg.reduction = Reduce::None;
    cfg.d_in = 8;
    cfg.d_lm = 16;
    Rng rng(5);
    auto params = ProjectorParams<double>::init(cfg, rng);
    auto x = testutil::random_tensor<double>({4, 8}, 17);
    NamedParams named;
    params.visit_params("projector", [&](const std::string& name, Tensor<double>& t) {
        named.emplace_back(name, t);
    });
    auto report = grad_check(
        [&] {
            auto y = project(x, params);
            return sum_all(mul(y, y));
        },
        named, {.tolerance = 1e-4});
    INFO("max rel err " << report.max_rel_error);
    CHECK(report.passed);
}

namespace {

LayerFeatures<float> synthetic_layers(std::size_t n_layers, Index frames, Index d,
                                      std::uint64_t seed) {
    LayerFeatures<float> lf;
    for (std::size_t l = 0; l <= n_layers; ++l)
        lf.per_layer.push_back(testutil::random_tensor<float>({frames, d}, seed + l));
    return lf;
}

}  // namespace

TEST_CASE("layer selection anchors at every_k and always includes the last layer") {
    CHECK(selected_layers(24, 12) == std::vector<std::size_t>{12, 24});
    CHECK(selected_layers(24, 6) == std::vector<std::size_t>{6, 12, 18, 24});
    CHECK(selected_layers(8, 3) == std::vector<std::size_t>{3, 6, 8});
    CHECK_THROWS_AS(selected_layers(8, 9), UsageError);
}

TEST_CASE("aggregate_layers modes") {
    ConnectorConfig cfg;
    cfg.reduction = Reduce::Pool;
    cfg.k = 2;
    cfg.d_in = 8;
    cfg.d_lm = 8;
    Rng rng(2);
    auto params = ProjectorParams<float>::init(cfg, rng);
    auto layers = synthetic_layers(24, 10, 8, 100);

    SECTION("every_k == L with before-mode degenerates to plain projection") {
        auto agg = aggregate_layers(layers, 24, AggPosition::Before, cfg, params);
        auto plain = project(reduce_sequence(layers.final_layer(), cfg), params);
        CHECK(testutil::max_abs_diff(agg.data(), plain.data()) == 0.0);
    }

    SECTION("before and after modes differ on random inputs") {
        auto before = aggregate_layers(layers, 12, AggPosition::Before, cfg, params);
        auto after = aggregate_layers(layers, 12, AggPosition::After, cfg, params);
        CHECK(testutil::max_abs_diff(before.data(), after.data()) > 1e-4);
    }

    SECTION("connect() honors the aggregation config") {
        cfg.layer_agg = true;
        cfg.agg_every = 12;
        cfg.agg_position = AggPosition::After;
        auto via_connect = connect(layers, cfg, params);
        auto direct = aggregate_layers(layers, 12, AggPosition::After, cfg, params);
        CHECK(via_connect.data() == direct.data());
    }
}

TEST_CASE("end-to-end token-rate chain: 100 frames/s -> 50/s -> 25/s") {
    ConnectorConfig cfg;
    cfg.reduction = Reduce::Pool;
    cfg.k = 2;
    cfg.d_in = 8;
    cfg.d_lm = 8;
    for (int sec = 1; sec <= 8; ++sec) {
        Index frames = static_cast<Index>(sec) * 100;   // mel frontend
        Index enc = EncoderConfig::out_tokens(frames);  // stride-2 conv
        CHECK(enc == static_cast<Index>(sec) * 50);
        CHECK(cfg.out_tokens(enc) == static_cast<Index>(sec) * 25);
    }
}
