#pragma once

#include "cblend/blend.hpp"
#include "cblend/diffusion.hpp"

namespace cblend::testing {

/// Network with every parameter random, so each block's conditioning matters.
inline NetDenoiser random_net(std::uint64_t seed, DenoiserDims dims, double scale = 0.3) {
    auto s = RngStream::derive(seed, "test-net");
    auto net = BlockConditionalDenoiser<float>::init_params(s, dims);
    for (auto& p : net.params())
        for (auto& v : p.data()) v = static_cast<float>(scale * s.next_gaussian());
    auto t = RngStream::derive(seed, "test-null");
    const Tensor null = gaussian_tensor(t, {dims.embed});
    return NetDenoiser(std::move(net), ConceptEmbedding(null.data().begin(), null.data().end()));
}

inline EmbeddingTable random_table(std::uint64_t seed, std::vector<std::string> concepts, std::size_t width) {
    auto s = RngStream::derive(seed, "test-table");
    return EmbeddingTable::random(ConceptVocab(std::move(concepts)), width, s);
}

inline DenoiserDims small_dims() {
    DenoiserDims d;
    d.input = 2;
    d.hidden = 16;
    d.embed = 8;
    d.time = 8;
    return d;
}

inline BlendSpec spec(BlendMethod m, std::string p1, std::string p2 = {}) {
    BlendSpec s;
    s.method = m;
    s.p1 = std::move(p1);
    s.p2 = std::move(p2);
    return s;
}

inline std::vector<float> bytes_of(const Tensor& t) { return std::vector<float>(t.data().begin(), t.data().end()); }

} // namespace cblend::testing
