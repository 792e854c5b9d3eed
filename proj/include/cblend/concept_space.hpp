#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cblend/rng.hpp"
#include "cblend/tensor.hpp"

namespace cblend {

/// A concept's conditioning vector.
using ConceptEmbedding = std::vector<float>;

/// Reserved id of the unconditional (guidance) embedding.
inline constexpr std::string_view kNullConcept = "<null>";

/// Ordered concept ids plus the null entry, which always occupies the last row.
class ConceptVocab {
public:
    explicit ConceptVocab(std::vector<std::string> concepts);

    const std::vector<std::string>& concepts() const noexcept { return concepts_; }

    /// Number of rows including the null entry.
    std::size_t rows() const noexcept { return concepts_.size() + 1; }
    std::size_t null_row() const noexcept { return concepts_.size(); }

    /// Row of a concept id or of kNullConcept. Throws LookupError otherwise.
    std::size_t row_of(std::string_view id) const;

    bool operator==(const ConceptVocab&) const = default;

private:
    std::vector<std::string> concepts_;
};

/// |vocab| x d matrix of trainable concept vectors.
class EmbeddingTable {
public:
    EmbeddingTable(ConceptVocab vocab, Tensor vectors);

    /// Rows drawn from N(0, 1) on `stream`.
    static EmbeddingTable random(ConceptVocab vocab, std::size_t width, RngStream& stream);

    const ConceptVocab& vocab() const noexcept { return vocab_; }
    std::size_t width() const noexcept { return vectors_.dim(1); }

    const Tensor& vectors() const noexcept { return vectors_; }
    Tensor& vectors() noexcept { return vectors_; }

    ConceptEmbedding encode(std::string_view id) const;
    ConceptEmbedding null_embedding() const { return encode(kNullConcept); }

    bool operator==(const EmbeddingTable&) const = default;

private:
    ConceptVocab vocab_;
    Tensor vectors_;
};

ConceptEmbedding encode(const EmbeddingTable& table, std::string_view id);

/**
 * w * e1 + (1 - w) * e2 elementwise.
 *
 * Coordinates where e1 and e2 agree are copied unchanged, so blending a vector
 * with itself returns it bit-exactly for any w; w = 1 and w = 0 return the
 * respective operand exactly.
 */
ConceptEmbedding blend_embeddings(std::span<const float> e1, std::span<const float> e2, double w);

} // namespace cblend
