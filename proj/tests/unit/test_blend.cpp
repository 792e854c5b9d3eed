#include <doctest.h>

#include "cblend/error.hpp"
#include "helpers.hpp"

using namespace cblend;
using namespace cblend::testing;

namespace {

const Prompt kA{"A", {1.0f, 2.0f}};
const Prompt kB{"B", {3.0f, 4.0f}};

bool same_everywhere(const BlendSchedule& s, const ConceptEmbedding& e) {
    for (std::size_t i = 0; i < s.n_steps(); ++i)
        for (auto b : kBlocks)
            if (s.at(i, b) != e) return false;
    return true;
}

} // namespace

TEST_SUITE("blend") {
TEST_CASE("textual at one half is the mean everywhere") {
    CHECK(same_everywhere(textual_schedule(kA, kB, 0.5), {2.0f, 3.0f}));
    CHECK(same_everywhere(textual_schedule(kB, kA, 0.5), {2.0f, 3.0f}));
}

TEST_CASE("textual weight one reduces to the first prompt") {
    CHECK(textual_schedule(kA, kB, 1.0).same_embeddings(BlendSchedule::single(kA, 25)));
    CHECK(textual_schedule(kA, kA, 0.3).same_embeddings(BlendSchedule::single(kA, 25)));
    CHECK_THROWS_AS(textual_schedule(kA, kB, 1.5), ConfigError);
    CHECK_THROWS_AS(textual_schedule(kA, kB, -0.1), ConfigError);
}

TEST_CASE("switch boundaries") {
    CHECK(same_everywhere(switch_schedule(kA, kB, 0), kB.embedding));
    CHECK(same_everywhere(switch_schedule(kA, kB, 25), kA.embedding));
    const auto s = switch_schedule(kA, kB, 12);
    for (std::size_t i = 0; i < 25; ++i) CHECK(s.at(i, Block::mid) == (i < 12 ? kA.embedding : kB.embedding));
    CHECK_THROWS_AS(switch_schedule(kA, kB, 26), ConfigError);
}

TEST_CASE("alternate default pattern is even/odd") {
    const auto s = alternate_schedule(kA, kB, std::nullopt, 4);
    CHECK(s.at(0, Block::enc) == kA.embedding);
    CHECK(s.at(1, Block::enc) == kB.embedding);
    CHECK(s.at(2, Block::dec) == kA.embedding);
    CHECK(s.at(3, Block::mid) == kB.embedding);
    CHECK(parity_pattern(4) == std::vector<bool>{true, false, true, false});
}

TEST_CASE("alternate patterns count and reduce") {
    CHECK(alternate_schedule(kA, kB, std::vector<bool>(25, true)).same_embeddings(BlendSchedule::single(kA, 25)));
    for (std::size_t k = 0; k <= 25; ++k) {
        const auto pat = ratio_pattern(k, 25);
        const auto s = alternate_schedule(kA, kB, pat);
        std::size_t seen = 0;
        for (std::size_t i = 0; i < 25; ++i) {
            seen += s.at(i, Block::enc) == kA.embedding;
            CHECK(s.at(i, Block::enc) == s.at(i, Block::dec));
        }
        CHECK(seen == k);
    }
    CHECK_THROWS_AS(alternate_schedule(kA, kB, std::vector<bool>(24, true)), ConfigError);
    CHECK_THROWS_AS(ratio_pattern(26, 25), ConfigError);
}

TEST_CASE("unet variants assign blocks") {
    const auto a = unet_schedule(kA, kB, UnetVariant::enc2_dec1);
    const auto b = unet_schedule(kA, kB, UnetVariant::enc1_dec2);
    for (std::size_t i = 0; i < 25; ++i) {
        CHECK(a.at(i, Block::enc) == kB.embedding);
        CHECK(a.at(i, Block::mid) == kA.embedding);
        CHECK(a.at(i, Block::dec) == kA.embedding);
        CHECK(b.at(i, Block::enc) == kA.embedding);
        CHECK(b.at(i, Block::mid) == kA.embedding);
        CHECK(b.at(i, Block::dec) == kB.embedding);
    }
    CHECK(unet_schedule(kA, kA, UnetVariant::enc2_dec1).same_embeddings(BlendSchedule::single(kA, 25)));
    CHECK(unet_schedule(kA, kA, UnetVariant::enc1_dec2).same_embeddings(BlendSchedule::single(kA, 25)));
    CHECK_THROWS_AS(parse_variant("mid_only"), ConfigError);
}

TEST_CASE("the schedule is total and rejects out-of-range steps") {
    const auto s = switch_schedule(kA, kB, 3, 5);
    CHECK_NOTHROW(s.at(4, Block::dec));
    CHECK_THROWS_AS(s.at(5, Block::enc), ContractError);
}

TEST_CASE("from_spec builds every method from a table") {
    const auto t = random_table(1, {"A", "B"}, 4);
    for (auto m : {BlendMethod::textual, BlendMethod::switch_at, BlendMethod::alternate, BlendMethod::unet}) {
        const auto s = BlendSchedule::from_spec(spec(m, "A", "B"), t);
        CHECK(s.spec().method == m);
        CHECK(s.n_steps() == 25);
        CHECK(parse_method(method_name(m)) == m);
    }
    CHECK_THROWS_AS(BlendSchedule::from_spec(spec(BlendMethod::textual, "A", "Q"), t), LookupError);
    CHECK_THROWS_AS(parse_method("average"), ConfigError);
}

TEST_CASE("mismatched prompt widths are shape errors") {
    const Prompt c{"C", {1.0f}};
    CHECK_THROWS_AS(textual_schedule(kA, c, 0.5), ShapeError);
}
}
