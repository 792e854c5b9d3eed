#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cblend/blend.hpp"
#include "cblend/concept_space.hpp"
#include "cblend/denoiser.hpp"
#include "cblend/domains.hpp"
#include "cblend/rng.hpp"
#include "cblend/tensor.hpp"

namespace cblend {

/// Forward-process parameters; alpha_bars are computed in double.
struct NoiseSchedule {
    std::vector<double> betas;
    std::vector<double> alphas;
    std::vector<double> alpha_bars;

    std::size_t t_train() const noexcept { return betas.size(); }
    double alpha_bar(int t) const { return alpha_bars.at(static_cast<std::size_t>(t)); }
};

/// Betas linear from beta_min to beta_max inclusive. Requires 0 < beta_min <= beta_max < 1.
NoiseSchedule linear_schedule(std::size_t t_train, double beta_min, double beta_max);

/// t_i = round((T-1) * (1 - i/(n-1))), i = 0..n-1. Requires 2 <= n_steps <= T.
std::vector<int> timestep_grid(std::size_t t_train, std::size_t n_steps);

enum class SamplerKind { ddpm, ddim };

std::string_view sampler_name(SamplerKind k);
SamplerKind parse_sampler(std::string_view name);

struct SamplerConfig {
    std::size_t n_steps = 25;
    SamplerKind kind = SamplerKind::ddim;
    double eta = 0.0;
    double guidance_scale = 7.5;
    // Box the predicted x0 is clamped to.
    double clip_min = -10.0;
    double clip_max = 10.0;

    /// Exact-oracle experiments: guidance 1, box [-10,10]^2.
    static SamplerConfig gmm_defaults();
    /// Trained glyph model: guidance 7.5, box [-1,1].
    static SamplerConfig glyph_defaults();

    /// Throws ConfigError unless 1 <= n_steps <= t_train, guidance >= 0, eta >= 0, clip_min < clip_max.
    void validate(std::size_t t_train) const;

    bool operator==(const SamplerConfig&) const = default;
};

/// Marks the last reverse step; its output is the predicted x0 without noise.
inline constexpr int kFinalStep = -1;

/// x_t = sqrt(ab_t) x0 + sqrt(1 - ab_t) eps, eps drawn from `stream` in row-major order.
std::pair<Tensor, Tensor> forward_diffuse(const Tensor& x0, int t, const NoiseSchedule& schedule, RngStream& stream);

/// eps_uncond + scale (eps_cond - eps_uncond); scale 1 returns eps_cond and scale 0 eps_uncond exactly.
Tensor cfg_combine(const Tensor& eps_uncond, const Tensor& eps_cond, double scale);

/**
 * One reverse update of a [B, D] batch from timestep t to t_prev.
 *
 * Both samplers first form x0_hat = (x_t - sqrt(1-ab_t) eps_hat) / sqrt(ab_t),
 * clamped to the config box. ddpm draws the posterior q(x_prev | x_t, x0_hat)
 * and consumes one gaussian per element from that row's stream; ddim takes the
 * deterministic update plus eta-scaled noise and consumes nothing when eta is 0.
 * With t_prev = kFinalStep both return x0_hat.
 */
Tensor reverse_step(const Tensor& x_t, const Tensor& eps_hat, int t, int t_prev, const NoiseSchedule& schedule,
                    const SamplerConfig& config, std::span<RngStream> streams);

/// Noise predictor driven by per-block embeddings.
class Denoiser {
public:
    virtual ~Denoiser() = default;

    virtual std::size_t data_dim() const = 0;
    virtual std::size_t embed_dim() const = 0;
    virtual ConceptEmbedding null_embedding() const = 0;

    /// x_t is [B, data_dim]; one timestep per row; each embedding is shared by the batch.
    virtual Tensor predict_eps(const Tensor& x_t, std::span<const int> timesteps, std::span<const float> enc,
                               std::span<const float> mid, std::span<const float> dec) const = 0;
};

/// The trained network together with its null embedding.
class NetDenoiser final : public Denoiser {
public:
    NetDenoiser(BlockConditionalDenoiser<float> net, ConceptEmbedding null_embedding);

    std::size_t data_dim() const override { return net_.dims().input; }
    std::size_t embed_dim() const override { return net_.dims().embed; }
    ConceptEmbedding null_embedding() const override { return null_; }
    Tensor predict_eps(const Tensor& x_t, std::span<const int> timesteps, std::span<const float> enc,
                       std::span<const float> mid, std::span<const float> dec) const override;

    const BlockConditionalDenoiser<float>& net() const noexcept { return net_; }

private:
    BlockConditionalDenoiser<float> net_;
    ConceptEmbedding null_;
};

/**
 * Bayes-optimal noise prediction for a GMM world.
 *
 * Embeddings live in concept space: coordinate c weights concept c (in
 * GmmDomain::concepts() order), negative entries count as zero, and the all-zero
 * vector is the unconditional prior. Component k's prior weight is scaled by
 * the summed weights of the concepts containing it. The oracle has no blocks: it
 * reads the shared embedding when all three agree and their mean otherwise.
 */
class GmmOracleDenoiser final : public Denoiser {
public:
    GmmOracleDenoiser(GmmDomain domain, NoiseSchedule schedule);

    std::size_t data_dim() const override { return 2; }
    std::size_t embed_dim() const override { return concepts_.size(); }
    ConceptEmbedding null_embedding() const override { return ConceptEmbedding(concepts_.size(), 0.0f); }
    Tensor predict_eps(const Tensor& x_t, std::span<const int> timesteps, std::span<const float> enc,
                       std::span<const float> mid, std::span<const float> dec) const override;

    /// Component weights an embedding selects.
    std::vector<double> component_weights(std::span<const float> embedding) const;

    const GmmDomain& domain() const noexcept { return domain_; }

private:
    GmmDomain domain_;
    NoiseSchedule schedule_;
    std::vector<std::string> concepts_;
};

/// One-hot concept rows plus a zero null row: the embedding table the oracle understands.
EmbeddingTable oracle_embeddings(const GmmDomain& domain);

/**
 * I = G(seed, schedule): one generated sample of shape [data_dim].
 *
 * x_T comes from stream "init-latent/{sample_id}", ddpm noise from
 * "ddpm-noise/{sample_id}". At inference step i every block takes
 * blend.at(i, block); the unconditional branch uses the null embedding on all
 * three blocks and is combined through cfg_combine.
 */
Tensor generate(const Denoiser& denoiser, const BlendSchedule& blend, const NoiseSchedule& schedule,
                const SamplerConfig& config, std::uint64_t seed, std::size_t sample_id);

/// Rows are bitwise identical to generate() for the same sample ids.
Tensor generate_batch(const Denoiser& denoiser, const BlendSchedule& blend, const NoiseSchedule& schedule,
                      const SamplerConfig& config, std::uint64_t seed, std::span<const std::size_t> sample_ids);

/// Same pipeline without ever evaluating the unconditional branch (guidance is ignored).
Tensor generate_conditional_only(const Denoiser& denoiser, const BlendSchedule& blend, const NoiseSchedule& schedule,
                                 const SamplerConfig& config, std::uint64_t seed,
                                 std::span<const std::size_t> sample_ids);

std::string init_latent_label(std::size_t sample_id);
std::string ddpm_noise_label(std::size_t sample_id);

} // namespace cblend
