#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "litetrack/tensor.hpp"
#include "test_support.hpp"

using namespace litetrack;

TEST_CASE("matmul matches hand arithmetic") {
    Tensor a({2, 2}, {1, 2, 3, 4});
    Tensor b({2, 2}, {5, 6, 7, 8});
    Tensor c = matmul(a, b);
    CHECK(c(0, 0) == 19.0f);
    CHECK(c(0, 1) == 22.0f);
    CHECK(c(1, 0) == 43.0f);
    CHECK(c(1, 1) == 50.0f);

    Tensor eye({2, 2}, {1, 0, 0, 1});
    Tensor d = matmul(eye, a);
    for (std::int64_t i = 0; i < 4; ++i) CHECK(d[i] == a[i]);
}

TEST_CASE("matmul counts M*K*N multiply-accumulates") {
    SplitMix64 rng(3);
    Tensor a = ts::rand_tensor({2, 3}, rng);
    Tensor b = ts::rand_tensor({3, 4}, rng);
    MacCounter counter;
    matmul(a, b, &counter);
    CHECK(counter.total == 24);

    // disabled counter stays untouched
    counter.enabled = false;
    matmul(a, b, &counter);
    CHECK(counter.total == 24);
}

TEST_CASE("matmul rejects mismatched shapes, naming both") {
    Tensor a({2, 3});
    Tensor b({4, 5});
    try {
        matmul(a, b);
        FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("[2x3]") != std::string::npos);
        CHECK(msg.find("[4x5]") != std::string::npos);
    }
}

TEST_CASE("matmul associativity within double-precision tolerance") {
    SplitMix64 rng(11);
    for (int t = 0; t < 5; ++t) {
        Tensor a = ts::rand_tensor({8, 8}, rng), b = ts::rand_tensor({8, 8}, rng);
        Tensor c = ts::rand_tensor({8, 8}, rng);
        Tensor left = matmul(matmul(a, b), c);
        Tensor right = matmul(a, matmul(b, c));
        for (std::int64_t i = 0; i < left.size(); ++i) {
            const double denom = std::max(1.0, std::abs(double(left[i])));
            CHECK(std::abs(double(left[i]) - double(right[i])) / denom < 1e-4);
        }
    }
}

TEST_CASE("counter total of a composite expression is the analytic sum") {
    SplitMix64 rng(5);
    Tensor a = ts::rand_tensor({4, 6}, rng), b = ts::rand_tensor({6, 3}, rng);
    Tensor c = ts::rand_tensor({3, 7}, rng);
    MacCounter counter;
    matmul(matmul(a, b, &counter), c, &counter);
    CHECK(counter.total == 4ull * 6 * 3 + 4ull * 3 * 7);
}

TEST_CASE("softmax_rows closed forms") {
    Tensor constant({1, 4}, {3.5f, 3.5f, 3.5f, 3.5f});
    Tensor p = softmax_rows(constant);
    for (std::int64_t i = 0; i < 4; ++i) CHECK(p[i] == Catch::Approx(0.25).margin(1e-7));

    Tensor pair({1, 2}, {0.0f, std::log(2.0f)});
    Tensor q = softmax_rows(pair);
    CHECK(q[0] == Catch::Approx(1.0 / 3.0).margin(1e-6));
    CHECK(q[1] == Catch::Approx(2.0 / 3.0).margin(1e-6));
}

TEST_CASE("softmax_rows shift invariance and row sums") {
    SplitMix64 rng(17);
    Tensor logits = ts::rand_tensor({6, 9}, rng, -50.0, 50.0);
    Tensor shifted = logits;
    for (std::int64_t i = 0; i < shifted.size(); ++i) shifted[i] += 13.75f;
    Tensor p = softmax_rows(logits), ps = softmax_rows(shifted);
    for (std::int64_t i = 0; i < p.size(); ++i) CHECK(std::abs(p[i] - ps[i]) < 1e-6);
    for (std::int64_t i = 0; i < p.extent(0); ++i) {
        double sum = 0.0;
        for (std::int64_t j = 0; j < p.extent(1); ++j) sum += p(i, j);
        CHECK(std::abs(sum - 1.0) <= 1e-6);
    }
}

TEST_CASE("softmax_rows rejects non-finite input") {
    Tensor bad({1, 3}, {1.0f, std::nanf(""), 0.0f});
    CHECK_THROWS_AS(softmax_rows(bad), NumericError);
}

TEST_CASE("layer_norm closed forms") {
    Tensor gamma({2}, {1, 1}), beta({2}, {0, 0});
    Tensor constant({1, 2}, {4.0f, 4.0f});
    Tensor z = layer_norm(constant, gamma, beta);
    CHECK(z[0] == Catch::Approx(0.0).margin(1e-6));
    CHECK(z[1] == Catch::Approx(0.0).margin(1e-6));

    Tensor pm({1, 2}, {1.0f, -1.0f});
    Tensor n = layer_norm(pm, gamma, beta);
    CHECK(n[0] == Catch::Approx(1.0).margin(1e-4));
    CHECK(n[1] == Catch::Approx(-1.0).margin(1e-4));

    // gamma = 0 leaves only beta
    Tensor g0({2}, {0, 0}), b5({2}, {5.0f, -2.0f});
    SplitMix64 rng(23);
    Tensor x = ts::rand_tensor({3, 2}, rng);
    Tensor out = layer_norm(x, g0, b5);
    for (std::int64_t i = 0; i < 3; ++i) {
        CHECK(out(i, 0) == 5.0f);
        CHECK(out(i, 1) == -2.0f);
    }
}

TEST_CASE("gelu closed forms and reflection identity") {
    Tensor zero({1}, {0.0f});
    CHECK(gelu(zero)[0] == 0.0f);

    Tensor three({1}, {3.0f});
    CHECK(gelu(three)[0] == Catch::Approx(2.99595).margin(1e-4));

    // Phi(x) + Phi(-x) = 1 gives gelu(x) - gelu(-x) = x
    SplitMix64 rng(29);
    Tensor x = ts::rand_tensor({32}, rng, -4.0, 4.0);
    Tensor nx = x;
    for (std::int64_t i = 0; i < nx.size(); ++i) nx[i] = -nx[i];
    Tensor gx = gelu(x), gnx = gelu(nx);
    for (std::int64_t i = 0; i < x.size(); ++i)
        CHECK(gx[i] - gnx[i] == Catch::Approx(x[i]).margin(1e-6));
}

TEST_CASE("patchify shapes and bit-exact round trip") {
    SplitMix64 rng(31);
    Tensor img32 = ts::rand_tensor({3, 32, 32}, rng);
    Tensor p = patchify(img32, 16);
    CHECK(p.extent(0) == 4);
    CHECK(p.extent(1) == 768);

    Tensor img128 = ts::rand_tensor({3, 128, 128}, rng);
    CHECK(patchify(img128, 16).extent(0) == 64);

    Tensor zero({3, 32, 32});
    Tensor pz = patchify(zero, 16);
    for (std::int64_t i = 0; i < pz.size(); ++i) CHECK(pz[i] == 0.0f);

    Tensor back = unpatchify(p, 16, 3, 32, 32);
    for (std::int64_t i = 0; i < img32.size(); ++i) CHECK(back[i] == img32[i]);

    CHECK_THROWS_AS(patchify(ts::rand_tensor({3, 30, 32}, rng), 16), DimensionError);
}

TEST_CASE("tensor invariants are enforced") {
    CHECK_THROWS_AS(Tensor({2, 0}), DimensionError);
    CHECK_THROWS_AS(Tensor({2, 2}, {1.0f, 2.0f}), DimensionError);
}
