#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cblend/blend.hpp"
#include "cblend/diffusion.hpp"
#include "cblend/domains.hpp"
#include "cblend/output.hpp"

namespace cblend {

/**
 * How well samples fit a concept. Rows of `samples` are in data space (GMM
 * coordinates, glyph pixels in [0,1]). GMM: mean concept log-likelihood;
 * glyph: mean negative centroid distance. Throws ContractError when empty.
 */
double concept_affinity(const Tensor& samples, const Domain& domain, const std::string& concept_id);

/// Per-sample affinity used by concept_affinity.
double sample_affinity(std::span<const float> sample, const Domain& domain, const std::string& concept_id);

/// Nearest concept (closest component mean for GMM, nearest centroid for glyphs); ties go to the smaller id.
Classification nearest_concept(std::span<const float> sample, const Domain& domain);

/// Diffusion-space generator output mapped to data space.
Tensor to_data_space(const Tensor& x, const Domain& domain);

struct SampleRecord {
    std::uint64_t seed = 0;
    std::size_t sample_id = 0;
    std::string nearest;
    double margin = 0.0;
    double affinity1 = 0.0;
    double affinity2 = 0.0;

    bool operator==(const SampleRecord&) const = default;
};

struct BlendProfile {
    BlendSpec spec;
    std::vector<SampleRecord> records;
    Tensor samples;  // [records, D] in data space, record order
    double fraction_nearest_p1 = 0.0;
    double fraction_nearest_p2 = 0.0;
    double mean_affinity1 = 0.0;
    double mean_affinity2 = 0.0;

    /// Recomputes the aggregates from the records.
    void aggregate();

    /// One line per sample.
    CsvTable records_csv() const;
};

/// What blend_profile and sweep need besides the blend itself.
struct EvalContext {
    const Denoiser& denoiser;
    const EmbeddingTable& table;
    const Domain& domain;
    NoiseSchedule schedule;
    SamplerConfig sampler;
};

/**
 * Generates n_samples per seed (sample ids 0..n-1) under the schedule the spec
 * describes and scores every sample against p1 and p2. Records are ordered
 * seed-major. A single-prompt spec scores p2 as p1.
 */
BlendProfile blend_profile(const EvalContext& ctx, const BlendSpec& spec, std::size_t n_samples,
                           std::span<const std::uint64_t> seeds);

struct SweepResult {
    BlendMethod method;
    std::vector<double> grid;
    std::vector<BlendProfile> profiles;

    /// param, fraction_nearest_p1, fraction_nearest_p2, mean_affinity_p1, mean_affinity_p2.
    CsvTable table() const;
};

/**
 * One profile per grid value, in grid order. The grid parameter depends on the
 * method: switch step (switch), count k of p1 steps spread by ratio_pattern
 * (alternate), weight w (textual). Throws ConfigError for an empty grid, an
 * unsweepable method or a value outside its range.
 */
SweepResult sweep(const EvalContext& ctx, BlendMethod method, std::span<const double> grid, const std::string& p1,
                  const std::string& p2, std::size_t n_samples, std::span<const std::uint64_t> seeds);

/// The spec a sweep uses for one grid value.
BlendSpec sweep_spec(BlendMethod method, double value, const std::string& p1, const std::string& p2,
                     std::size_t n_steps);

/// Summary line per profile: method, p1, p2, parameters, aggregates.
CsvTable profiles_csv(std::span<const BlendProfile> profiles);

// Statistics used by the acceptance checks.

/// Spearman correlation with average ranks for ties; 0 when either side is constant.
double spearman_rho(std::span<const double> x, std::span<const double> y);

/// Ranks 1..n with ties sharing their average rank.
std::vector<double> average_ranks(std::span<const double> v);

/// z * sqrt(p(1-p)/n), the half-width of a normal-approximation binomial band.
double binomial_half_width(double p, std::size_t n, double z);

/// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|.
double ks_statistic(std::vector<double> a, std::vector<double> b);

/// Asymptotic KS critical value c(alpha) sqrt((n+m)/(n m)).
double ks_critical(std::size_t n, std::size_t m, double alpha);

} // namespace cblend
