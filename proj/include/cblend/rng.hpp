#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include "cblend/tensor.hpp"

namespace cblend {

/**
 * Labeled, seeded random stream.
 *
 * The state is derived from (seed, label) by hashing the label bytes into the
 * seed with the SplitMix64 finalizer, then expanding the hash into four
 * 64-bit words with the SplitMix64 sequence. A zero word is replaced by
 * kZeroWordReplacement. The state advances with xoshiro256++.
 *
 * Gaussians come from Box-Muller over pairs of 53-bit uniforms; the sine half
 * of each pair is cached and returned by the next call, so the i-th gaussian
 * depends only on (seed, label, i) regardless of how calls are batched.
 *
 * Label conventions used across the project:
 *   init-latent/{sample_id}   initial x_T of one generated sample
 *   ddpm-noise/{sample_id}    per-step noise of one generated sample
 *   train/{epoch}             data, timesteps, noise and dropout of an epoch
 *   init-params               denoiser weight initialisation
 */
class RngStream {
public:
    static constexpr std::size_t kMaxLabelBytes = 256;
    static constexpr std::uint64_t kZeroWordReplacement = 0x9E3779B97F4A7C15ULL;

    /// Throws ConfigError when the label is empty or longer than kMaxLabelBytes.
    static RngStream derive(std::uint64_t seed, std::string_view label);

    std::uint64_t next_u64();

    /// Uniform in [0, 1) with 53 bits of resolution.
    double next_uniform();

    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t next_below(std::uint64_t n);

    double next_gaussian();

    const std::array<std::uint64_t, 4>& state() const noexcept { return state_; }
    const std::string& label() const noexcept { return label_; }

    /// Number of 64-bit words consumed from the generator so far.
    std::uint64_t draws() const noexcept { return draws_; }

    friend bool operator==(const RngStream&, const RngStream&) = default;

private:
    RngStream() = default;

    std::array<std::uint64_t, 4> state_{};
    std::string label_;
    std::uint64_t draws_ = 0;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

/// Box-Muller transform of two uniforms. u1 is clamped to the smallest positive normal double.
std::array<double, 2> box_muller(double u1, double u2);

/// Fills a tensor of the given shape in row-major order with successive gaussian draws.
/// Throws ConfigError when the shape has zero elements.
Tensor gaussian_tensor(RngStream& stream, std::span<const std::size_t> shape);

inline Tensor gaussian_tensor(RngStream& stream, std::initializer_list<std::size_t> shape) {
    return gaussian_tensor(stream, std::span<const std::size_t>(shape.begin(), shape.size()));
}

} // namespace cblend
