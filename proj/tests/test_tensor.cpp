// Copyright (c) 2026 almlab contributors
// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch.hpp>

#include <cmath>
#include <numbers>

#include "almlab/tensor.hpp"
#include "helpers.hpp"

using namespace alm;

TEST_CASE("tensor construction enforces shape/data consistency") {
    CHECK_THROWS_AS(Tensor<float>::from({2, 3}, std::vector<float>(5)), ShapeError);
    CHECK_THROWS_AS(Tensor<float>::from({0}, {}), ShapeError);
    auto t = Tensor<float>::from({2, 2}, {1, 2, 3, 4});
    CHECK(t.numel() == 4);
    CHECK(t.at(1, 0) == 3.0f);
}

TEST_CASE("layer_norm fixtures") {
    auto gamma1 = Tensor<double>::full({3}, 1.0);
    auto beta0 = Tensor<double>::zeros({3});

    SECTION("constant row normalizes to zero") {
        auto x = Tensor<double>::from({3}, {5, 5, 5});
        auto y = layer_norm(x, gamma1, beta0, 1e-5);
        for (double v : y.data()) CHECK(v == Approx(0.0).margin(1e-12));
    }

    SECTION("two-point row hits +-1 as eps vanishes") {
        auto g = Tensor<double>::full({2}, 1.0);
        auto b = Tensor<double>::zeros({2});
        auto x = Tensor<double>::from({2}, {1, 3});
        auto y = layer_norm(x, g, b, 1e-12);
        CHECK(y.data()[0] == Approx(-1.0).margin(1e-5));
        CHECK(y.data()[1] == Approx(1.0).margin(1e-5));
    }

    SECTION("gamma=0 makes the affine dominate") {
        auto g = Tensor<double>::zeros({3});
        auto b = Tensor<double>::full({3}, 7.0);
        auto x = testutil::random_tensor<double>({4, 3}, 11);
        auto y = layer_norm(x, g, b, 1e-5);
        for (double v : y.data()) CHECK(v == Approx(7.0));
    }

    SECTION("zero-length last axis rejected") {
        CHECK_THROWS_AS(Tensor<double>::zeros({2, 0}), ShapeError);
    }

    SECTION("eps must be positive") {
        auto x = Tensor<double>::from({3}, {1, 2, 3});
        CHECK_THROWS_AS(layer_norm(x, gamma1, beta0, 0.0), UsageError);
    }
}

TEST_CASE("layer_norm output variance is 1 for unit gamma") {
    for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
        auto x = testutil::random_tensor<double>({6, 16}, seed, 2.0);
        auto g = Tensor<double>::full({16}, 1.0);
        auto b = Tensor<double>::zeros({16});
        auto y = layer_norm(x, g, b, 1e-5);
        for (Index r = 0; r < 6; ++r) {
            double mean = 0, var = 0;
            for (Index c = 0; c < 16; ++c) mean += y.at(r, c);
            mean /= 16;
            for (Index c = 0; c < 16; ++c) var += (y.at(r, c) - mean) * (y.at(r, c) - mean);
            var /= 16;
            CHECK(mean == Approx(0.0).margin(1e-8));
            CHECK(var == Approx(1.0).margin(1e-4));
        }
    }
}

namespace {

// Independent Gaussian CDF via Simpson quadrature of the density.
double phi_quadrature(double x) {
    const int n = 2000;
    double h = x / n;
    auto density = [](double t) {
        return std::exp(-0.5 * t * t) / std::sqrt(2.0 * std::numbers::pi);
    };
    double acc = density(0.0) + density(x);
    for (int i = 1; i < n; ++i) acc += 2.0 * (1 + i % 2) * density(i * h);
    return 0.5 + acc * h / 3.0;
}

}  // namespace

TEST_CASE("gelu uses the exact Gaussian CDF") {
    auto x = Tensor<double>::from({3}, {0.0, 1.0, 10.0});
    auto y = gelu(x);
    CHECK(y.data()[0] == 0.0);
    CHECK(y.data()[1] == Approx(1.0 * phi_quadrature(1.0)).margin(1e-6));
    CHECK(y.data()[1] == Approx(0.84134).margin(1e-5));
    CHECK(y.data()[2] == Approx(10.0).margin(1e-6));
}

TEST_CASE("cross_entropy fixtures") {
    SECTION("uniform logits over 4 classes give ln 4") {
        auto logits = Tensor<double>::zeros({1, 4});
        auto loss = cross_entropy(logits, {2}, {1});
        CHECK(loss.item() == Approx(std::log(4.0)).margin(1e-9));
    }

    SECTION("a +30 spike on the target drives loss below 1e-9") {
        auto logits = Tensor<double>::zeros({1, 5});
        logits.data()[3] = 30.0;
        auto loss = cross_entropy(logits, {3}, {1});
        CHECK(loss.item() < 1e-9);
    }

    SECTION("masked positions contribute nothing") {
        auto logits = Tensor<double>::zeros({2, 4});
        logits.data()[0 * 4 + 1] = 2.0;             // unmasked position
        logits.data()[1 * 4 + 0] = 30.0;            // masked position, wrong-answer spike
        auto full = cross_entropy(logits, {1, 3}, {1, 0});
        auto solo = cross_entropy(slice_rows(logits, 0, 1), {1}, {1});
        CHECK(full.item() == Approx(solo.item()));
    }

    SECTION("all positions masked is an error") {
        auto logits = Tensor<double>::zeros({2, 4});
        CHECK_THROWS_AS(cross_entropy(logits, {0, 0}, {0, 0}), DataError);
    }

    SECTION("unmasked target out of range is an error") {
        auto logits = Tensor<double>::zeros({1, 4});
        CHECK_THROWS_AS(cross_entropy(logits, {4}, {1}), DataError);
    }
}

TEST_CASE("softmax rows sum to one") {
    for (std::uint64_t seed : {7, 8, 9, 10, 11}) {
        auto x = testutil::random_tensor<double>({5, 9}, seed, 3.0);
        auto y = softmax_rows(x);
        for (Index r = 0; r < 5; ++r) {
            double s = 0;
            for (Index c = 0; c < 9; ++c) s += y.at(r, c);
            CHECK(s == Approx(1.0).margin(1e-6));
        }
    }
}

TEST_CASE("primitives are deterministic given identical inputs") {
    auto x = testutil::random_tensor<float>({8, 8}, 42);
    auto w = testutil::random_tensor<float>({8, 8}, 43);
    auto a = matmul(x, w);
    auto b = matmul(x, w);
    CHECK(a.data() == b.data());
    auto g1 = gelu(x);
    auto g2 = gelu(x);
    CHECK(g1.data() == g2.data());
}

TEST_CASE("frozen leaves receive no gradient") {
    auto x = testutil::random_tensor<double>({3, 4}, 1, 1.0, true);
    auto w = testutil::random_tensor<double>({4, 2}, 2, 1.0, false);  // frozen
    auto loss = sum_all(matmul(x, w));
    loss.backward();
    for (double g : w.grad()) CHECK(g == 0.0);
    bool any = false;
    for (double g : x.grad()) any = any || g != 0.0;
    CHECK(any);
}

TEST_CASE("NoGradGuard suppresses graph construction") {
    auto x = testutil::random_tensor<double>({2, 2}, 3, 1.0, true);
    NoGradGuard ng;
    auto y = sum_all(mul(x, x));
    CHECK_THROWS_AS(y.backward(), UsageError);
}

TEST_CASE("pool and stack row ops") {
    SECTION("adjacent means") {
        auto x = Tensor<double>::from({4, 1}, {1, 2, 3, 4});
        auto y = mean_pool_rows(x, 2);
        CHECK(y.data() == std::vector<double>{1.5, 3.5});
    }
    SECTION("trailing partial pool group averages real members only") {
        auto x = Tensor<double>::from({5, 1}, {1, 2, 3, 4, 10});
        auto y = mean_pool_rows(x, 2);
        REQUIRE(y.rows() == 3);
        CHECK(y.data()[2] == Approx(10.0));
    }
    SECTION("stack concatenates along features and zero-pads the tail") {
        auto x = Tensor<double>::from({3, 2}, {1, 2, 3, 4, 5, 6});
        auto y = stack_rows(x, 2);
        REQUIRE(y.shape() == std::vector<Index>{2, 4});
        CHECK(y.data() == std::vector<double>{1, 2, 3, 4, 5, 6, 0, 0});
    }
    SECTION("k=1 is the identity for both") {
        auto x = testutil::random_tensor<double>({5, 3}, 4);
        CHECK(mean_pool_rows(x, 1).data() == x.data());
        CHECK(stack_rows(x, 1).data() == x.data());
    }
}

TEST_CASE("primitives keep finite inputs finite") {
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        auto a = testutil::random_tensor<float>({6, 8}, seed * 3 + 1, 3.0f);
        auto b = testutil::random_tensor<float>({6, 8}, seed * 3 + 2, 3.0f);
        auto w = testutil::random_tensor<float>({8, 4}, seed * 3 + 3, 3.0f);
        auto g = Tensor<float>::full({8}, 1.0f);
        auto z = Tensor<float>::zeros({8});
        CHECK(add(a, b).all_finite());
        CHECK(mul(a, b).all_finite());
        CHECK(matmul(a, w).all_finite());
        CHECK(gelu(a).all_finite());
        CHECK(layer_norm(a, g, z).all_finite());
        CHECK(softmax_rows(a).all_finite());
        CHECK(mean_pool_rows(a, 4).all_finite());
        CHECK(stack_rows(a, 4).all_finite());
        // masked softmax rows stay finite under the additive causal mask
        auto scores = testutil::random_tensor<float>({6, 6}, seed * 3 + 4, 3.0f);
        auto masked = softmax_rows(add(scores, attention_mask<float>(6, true, nullptr)));
        CHECK(masked.all_finite());
    }
    // error-state detection
    auto bad = Tensor<float>::from({2}, {1.0f, std::numeric_limits<float>::infinity()});
    CHECK_FALSE(bad.all_finite());
    CHECK_THROWS_AS(bad.check_finite("test"), NumericError);
}

TEST_CASE("dropout is deterministic per seed and a no-op at p=0") {
    auto x = testutil::random_tensor<float>({64}, 5);
    auto a = dropout(x, 0.5, 123);
    auto b = dropout(x, 0.5, 123);
    CHECK(a.data() == b.data());
    auto c = dropout(x, 0.0, 7);
    CHECK(c.data() == x.data());
    CHECK_THROWS_AS(dropout(x, 1.0, 0), UsageError);
}
