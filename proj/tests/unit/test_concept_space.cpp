#include <doctest.h>

#include "cblend/concept_space.hpp"
#include "cblend/error.hpp"
#include "cblend/rng.hpp"

using namespace cblend;

TEST_SUITE("concept_space") {
TEST_CASE("vocab keeps order and puts the null row last") {
    const ConceptVocab v({"B", "A"});
    CHECK(v.rows() == 3);
    CHECK(v.row_of("B") == 0);
    CHECK(v.row_of(kNullConcept) == 2);
    CHECK_THROWS_AS(v.row_of("Z"), LookupError);
    CHECK_THROWS_AS(ConceptVocab({"A", "A"}), ConfigError);
}

TEST_CASE("encode is a row lookup and repeatable") {
    auto s = RngStream::derive(1, "table");
    const EmbeddingTable t = EmbeddingTable::random(ConceptVocab({"A", "B"}), 4, s);
    const auto e = t.encode("B");
    CHECK(e.size() == 4);
    CHECK(e == t.encode("B"));
    for (std::size_t j = 0; j < 4; ++j) CHECK(e[j] == t.vectors().at(1, j));
    CHECK_THROWS_AS(t.encode("nope"), LookupError);
}

TEST_CASE("blend_embeddings arithmetic and exact reductions") {
    const std::vector<float> e1{1, 2}, e2{3, 4};
    CHECK(blend_embeddings(e1, e2, 0.5) == std::vector<float>{2, 3});
    CHECK(blend_embeddings(e1, e2, 1.0) == e1);
    CHECK(blend_embeddings(e1, e2, 0.0) == e2);
    const std::vector<float> odd{0.1f, -7.3f};
    for (double w : {0.0, 0.13, 0.5, 0.77, 1.0}) CHECK(blend_embeddings(odd, odd, w) == odd);
}

TEST_CASE("blend at one half is symmetric in its operands") {
    auto s = RngStream::derive(2, "sym");
    for (int i = 0; i < 50; ++i) {
        const Tensor a = gaussian_tensor(s, {16});
        const Tensor b = gaussian_tensor(s, {16});
        CHECK(blend_embeddings(a.data(), b.data(), 0.5) == blend_embeddings(b.data(), a.data(), 0.5));
    }
}

TEST_CASE("width mismatch is a shape error") {
    const std::vector<float> a{1, 2}, b{1, 2, 3};
    CHECK_THROWS_AS(blend_embeddings(a, b, 0.5), ShapeError);
}
}
