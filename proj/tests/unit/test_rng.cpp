#include <doctest.h>

#include <cmath>

#include "cblend/error.hpp"
#include "cblend/rng.hpp"

using namespace cblend;

TEST_SUITE("rng") {
TEST_CASE("same seed and label replay the same stream") {
    auto a = RngStream::derive(42, "init-latent");
    auto b = RngStream::derive(42, "init-latent");
    for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("distinct labels give distinct streams") {
    auto a = RngStream::derive(42, "init-latent");
    auto b = RngStream::derive(42, "train");
    int differing = 0;
    for (int i = 0; i < 64; ++i) differing += a.next_u64() != b.next_u64();
    CHECK(differing >= 1);
}

TEST_CASE("derived state words are nonzero") {
    const auto s = RngStream::derive(0, "x");
    for (auto w : s.state()) CHECK(w != 0);
}

TEST_CASE("bad labels are configuration errors") {
    CHECK_THROWS_AS(RngStream::derive(1, ""), ConfigError);
    CHECK_THROWS_AS(RngStream::derive(1, std::string(RngStream::kMaxLabelBytes + 1, 'a')), ConfigError);
    CHECK_NOTHROW(RngStream::derive(1, std::string(RngStream::kMaxLabelBytes, 'a')));
}

TEST_CASE("uniforms lie in [0,1) and next_below in range") {
    auto s = RngStream::derive(3, "u");
    for (int i = 0; i < 10000; ++i) {
        const double u = s.next_uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        CHECK(s.next_below(3) < 3u);
    }
}

TEST_CASE("gaussian moments over a million draws") {
    auto s = RngStream::derive(7, "moments");
    const int n = 1000000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double g = s.next_gaussian();
        sum += g;
        sq += g * g;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    CHECK(std::abs(mean) <= 0.005);
    CHECK(std::abs(var - 1.0) <= 0.01);
}

TEST_CASE("gaussian_tensor fills row-major from successive draws") {
    auto a = RngStream::derive(5, "t");
    auto b = RngStream::derive(5, "t");
    const Tensor t = gaussian_tensor(a, {2, 3});
    CHECK(t.size() == 6);
    for (std::size_t i = 0; i < 6; ++i) CHECK(t.data()[i] == static_cast<float>(b.next_gaussian()));
    CHECK(a == b);
}

TEST_CASE("consecutive tensors continue the flat sequence") {
    auto a = RngStream::derive(9, "flat");
    auto b = RngStream::derive(9, "flat");
    const Tensor big = gaussian_tensor(a, {16, 16});
    const Tensor small = gaussian_tensor(a, {4});
    const Tensor flat = gaussian_tensor(b, {260});
    for (std::size_t i = 0; i < 256; ++i) CHECK(big.data()[i] == flat.data()[i]);
    for (std::size_t i = 0; i < 4; ++i) CHECK(small.data()[i] == flat.data()[256 + i]);
}

TEST_CASE("same stream and shape give identical tensors") {
    auto a = RngStream::derive(11, "x");
    auto b = RngStream::derive(11, "x");
    CHECK(gaussian_tensor(a, {3, 5}) == gaussian_tensor(b, {3, 5}));
}

TEST_CASE("zero-sized shapes are rejected") {
    auto s = RngStream::derive(1, "z");
    CHECK_THROWS_AS(gaussian_tensor(s, {0, 3}), ConfigError);
}
}
