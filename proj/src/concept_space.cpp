#include "cblend/concept_space.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace cblend {

ConceptVocab::ConceptVocab(std::vector<std::string> concepts) : concepts_(std::move(concepts)) {
    std::set<std::string> seen;
    for (const auto& c : concepts_) {
        if (c.empty()) throw ConfigError("vocab: empty concept id");
        if (c == kNullConcept) throw ConfigError("vocab: the null id is reserved");
        if (!seen.insert(c).second) throw ConfigError("vocab: duplicate concept id '" + c + "'");
    }
}

std::size_t ConceptVocab::row_of(std::string_view id) const {
    if (id == kNullConcept) return null_row();
    auto it = std::find(concepts_.begin(), concepts_.end(), id);
    if (it == concepts_.end()) throw LookupError("vocab: unknown concept '" + std::string(id) + "'");
    return static_cast<std::size_t>(it - concepts_.begin());
}

EmbeddingTable::EmbeddingTable(ConceptVocab vocab, Tensor vectors)
    : vocab_(std::move(vocab)), vectors_(std::move(vectors)) {
    if (vectors_.rank() != 2 || vectors_.dim(0) != vocab_.rows()) {
        throw ShapeError("embedding table: expected " + std::to_string(vocab_.rows()) + " rows, got shape " +
                         shape_string(vectors_.shape()));
    }
    for (float v : vectors_.data()) {
        if (!std::isfinite(v)) throw NumericError("embedding table: non-finite entry");
    }
}

EmbeddingTable EmbeddingTable::random(ConceptVocab vocab, std::size_t width, RngStream& stream) {
    const std::size_t rows = vocab.rows();
    return EmbeddingTable(std::move(vocab), gaussian_tensor(stream, {rows, width}));
}

ConceptEmbedding EmbeddingTable::encode(std::string_view id) const {
    const auto r = vectors_.row(vocab_.row_of(id));
    return ConceptEmbedding(r.begin(), r.end());
}

ConceptEmbedding encode(const EmbeddingTable& table, std::string_view id) { return table.encode(id); }

ConceptEmbedding blend_embeddings(std::span<const float> e1, std::span<const float> e2, double w) {
    if (e1.size() != e2.size()) {
        throw ShapeError("blend_embeddings: widths " + std::to_string(e1.size()) + " and " +
                         std::to_string(e2.size()) + " differ");
    }
    ConceptEmbedding out(e1.size());
    const double v = 1.0 - w;
    for (std::size_t i = 0; i < e1.size(); ++i) {
        if (e1[i] == e2[i]) {
            out[i] = e1[i];
        } else {
            out[i] = static_cast<float>(w * static_cast<double>(e1[i]) + v * static_cast<double>(e2[i]));
        }
    }
    return out;
}

} // namespace cblend
