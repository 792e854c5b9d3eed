#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cblend/autodiff.hpp"
#include "cblend/rng.hpp"
#include "cblend/tensor.hpp"

namespace cblend {

/// The three conditioning entry points of the denoiser.
enum class Block { enc, mid, dec };
inline constexpr std::array<Block, 3> kBlocks{Block::enc, Block::mid, Block::dec};

std::string_view block_name(Block b);

struct DenoiserDims {
    std::size_t input = 2;    // data width (2 for the GMM, 256 for glyphs)
    std::size_t hidden = 64;
    std::size_t embed = 16;   // concept embedding width
    std::size_t time = 32;    // sinusoidal time features, even

    bool operator==(const DenoiserDims&) const = default;
};

/// Sinusoidal features: sin(t / 10000^(2k/width)) for k < width/2, then the matching cosines.
/// Throws ConfigError for odd or zero width.
std::vector<double> time_embed(double t, std::size_t width);

/// Per-sample conditioning rows, one [batch, embed] tensor per block.
template <class T>
struct BlockConditioning {
    BasicTensor<T> enc;
    BasicTensor<T> mid;
    BasicTensor<T> dec;

    const BasicTensor<T>& operator[](Block b) const { return b == Block::enc ? enc : b == Block::mid ? mid : dec; }
};

/// Repeats one embedding per block over a batch.
template <class T>
BlockConditioning<T> broadcast_conditioning(std::span<const float> enc, std::span<const float> mid,
                                            std::span<const float> dec, std::size_t batch);

/**
 * Encoder -> bottleneck -> decoder MLP with a skip connection and FiLM
 * conditioning in every hidden layer.
 *
 *   enc.0  input  -> hidden      film(enc) silu
 *   enc.1  hidden -> hidden      film(enc) silu        (skip source)
 *   mid.0  hidden -> hidden      film(mid) silu
 *   dec.0  [mid, skip] -> hidden film(dec) silu
 *   dec.1  hidden -> hidden      film(dec) silu
 *   out    hidden -> input       affine
 *
 * A film layer's scale and shift are affine maps of concat(embedding of its
 * block, time features), so each block sees only its own conditioning row.
 */
template <class T>
class BlockConditionalDenoiser {
public:
    using Id = typename Tape<T>::Id;

    BlockConditionalDenoiser(DenoiserDims dims, std::vector<std::string> names, std::vector<BasicTensor<T>> params);

    /// He-normal affine weights, zero biases, zero film projections.
    static BlockConditionalDenoiser init_params(RngStream& stream, DenoiserDims dims);

    /// Parameter names and shapes in canonical (serialization) order.
    static std::vector<std::pair<std::string, Shape>> layout(const DenoiserDims& dims);

    const DenoiserDims& dims() const noexcept { return dims_; }
    const std::vector<std::string>& names() const noexcept { return names_; }
    const std::vector<BasicTensor<T>>& params() const noexcept { return params_; }
    std::vector<BasicTensor<T>>& params() noexcept { return params_; }

    BasicTensor<T>& param(std::string_view name);
    const BasicTensor<T>& param(std::string_view name) const;

    /// Records the forward pass. `param_ids` follow names() order; x is [B, input],
    /// time_features [B, time], each conditioning id [B, embed].
    Id forward(Tape<T>& tape, std::span<const Id> param_ids, Id x, Id time_features, Id enc, Id mid, Id dec) const;

    /// Predicted noise for a batch; `timesteps` holds one entry per row.
    BasicTensor<T> predict_eps(const BasicTensor<T>& x_t, std::span<const int> timesteps,
                               const BlockConditioning<T>& cond) const;

    /// Time features for a batch of timesteps.
    BasicTensor<T> time_features(std::span<const int> timesteps) const;

    template <class U>
    BlockConditionalDenoiser<U> cast() const {
        std::vector<BasicTensor<U>> ps;
        for (const auto& p : params_) ps.push_back(p.template cast<U>());
        return BlockConditionalDenoiser<U>(dims_, names_, std::move(ps));
    }

    bool operator==(const BlockConditionalDenoiser&) const = default;

private:
    std::size_t index_of(std::string_view name) const;

    DenoiserDims dims_;
    std::vector<std::string> names_;
    std::vector<BasicTensor<T>> params_;
};

template <class T>
BasicTensor<T> predict_eps(const BlockConditionalDenoiser<T>& net, const BasicTensor<T>& x_t,
                           std::span<const int> timesteps, const BlockConditioning<T>& cond) {
    return net.predict_eps(x_t, timesteps, cond);
}

} // namespace cblend
