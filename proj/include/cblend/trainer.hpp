#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cblend/concept_space.hpp"
#include "cblend/denoiser.hpp"
#include "cblend/diffusion.hpp"
#include "cblend/domains.hpp"
#include "cblend/tensor.hpp"

namespace cblend {

struct TrainConfig {
    std::size_t epochs = 30;
    std::size_t batch_size = 64;
    std::size_t steps_per_epoch = 100;  // optimizer steps per epoch
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double p_uncond = 0.1;
    std::uint64_t seed = 0;
    // Forward process the model is trained for.
    std::size_t t_train = 1000;
    double beta_min = 1e-4;
    double beta_max = 0.02;

    /// Throws ConfigError unless p_uncond in [0,1), lr >= 0, betas in [0,1), eps > 0, counts >= 1.
    void validate() const;

    NoiseSchedule schedule() const { return linear_schedule(t_train, beta_min, beta_max); }

    bool operator==(const TrainConfig&) const = default;
};

/// Adam moments, one pair per optimized tensor.
struct AdamState {
    std::uint64_t step = 0;
    std::vector<Tensor> m;
    std::vector<Tensor> v;

    /// Zero moments matching `params`.
    static AdamState zeros_like(std::span<const Tensor> params);

    bool operator==(const AdamState&) const = default;
};

/**
 * One Adam update with bias correction, in double then rounded to float.
 * Moments are created on first use when the state is empty.
 */
void adam_step(std::span<Tensor> params, std::span<const Tensor> grads, AdamState& state, const TrainConfig& config);

/// Everything needed to resume training or to sample.
struct Checkpoint {
    std::string domain_kind;  // "gmm" or "glyph"
    BlockConditionalDenoiser<float> net;
    EmbeddingTable table;
    AdamState adam;  // optimized tensors: net params in layout order, then the table
    TrainConfig config;
    std::vector<double> loss_curve;  // mean training loss per completed epoch

    bool operator==(const Checkpoint&) const = default;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Fresh model for a domain: He-initialized net and N(0,1) table from streams derived from `seed`.
Checkpoint init_checkpoint(const Domain& domain, DenoiserDims dims, const TrainConfig& config);

/// Per-epoch progress: epoch index and its mean loss.
using EpochCallback = std::function<void(std::size_t epoch, double mean_loss)>;

/**
 * Runs config.epochs further epochs of eps-prediction training.
 *
 * Epoch e draws everything from stream "train/{e}" (e counts from the
 * checkpoint's loss curve, so resumed runs continue the sequence). Per datum:
 * concept uniform, datum, t uniform in [0, T), dropout coin, then the noise.
 * Dropped data condition all three blocks on the null row. Throws NumericError
 * if an epoch's mean loss is not finite.
 */
void train(const Domain& domain, Checkpoint& ckpt, const EpochCallback& on_epoch = {});

/// Single-call form: init_checkpoint followed by train.
Checkpoint train_new(const Domain& domain, DenoiserDims dims, const TrainConfig& config,
                     const EpochCallback& on_epoch = {});

/**
 * Mean conditional eps-MSE over n fresh (concept, datum, t, eps) draws from `stream`.
 * Concepts cycle through the domain's concepts in order.
 */
double loss_eval(const Denoiser& denoiser, const EmbeddingTable& table, const Domain& domain,
                 const NoiseSchedule& schedule, std::size_t n, RngStream& stream);

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);

/// Verifies magic, version, structure and CRC, in that order.
Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Reads a whole file; throws IoError.
std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
/// Writes bytes, creating parent directories; throws IoError.
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

/// Denoiser view of a checkpoint.
NetDenoiser checkpoint_denoiser(const Checkpoint& ckpt);

} // namespace cblend
