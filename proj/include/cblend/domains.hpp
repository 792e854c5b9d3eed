#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "cblend/rng.hpp"
#include "cblend/tensor.hpp"

namespace cblend {

using Vec2 = std::array<double, 2>;

struct GmmComponent {
    Vec2 mean{};
    double variance = 1.0;  // isotropic
};

/// Smallest variance used by the posterior formulas.
inline constexpr double kVarianceFloor = 1e-12;

/**
 * 2-D isotropic Gaussian mixture with named concepts, each a subset of components.
 *
 * Concepts are kept in lexicographic order; all queries accepting a concept
 * throw LookupError for unknown ids.
 */
class GmmDomain {
public:
    GmmDomain(std::vector<GmmComponent> components, std::vector<double> weights,
              std::map<std::string, std::vector<std::size_t>> concept_map);

    /// A = N((-4,0), 0.25 I), B = N((4,0), 0.25 I), C = N((0,4), 0.25 I), equal weights.
    static GmmDomain default_world();

    const std::vector<GmmComponent>& components() const noexcept { return components_; }
    const std::vector<double>& weights() const noexcept { return weights_; }
    const std::map<std::string, std::vector<std::size_t>>& concept_map() const noexcept { return concept_map_; }
    std::vector<std::string> concepts() const;

    /// Prior weights restricted to a concept (unnormalised). nullopt selects the whole mixture.
    std::vector<double> concept_weights(const std::optional<std::string>& concept_id) const;

    std::vector<Vec2> sample(const std::string& concept_id, std::size_t n, RngStream& stream) const;

    /// E[x0 | x_t] for x_t = sqrt(ab) x0 + sqrt(1 - ab) eps, x0 from the selected mixture.
    Vec2 x0_expectation(const std::optional<std::string>& concept_id, Vec2 x_t, double alpha_bar) const;

    /// Same, with explicit (unnormalised, non-negative) component weights.
    Vec2 x0_expectation(std::span<const double> weights, Vec2 x_t, double alpha_bar) const;

    /// (x_t - sqrt(ab) E[x0|x_t]) / sqrt(1 - ab). Requires alpha_bar in (0, 1).
    Vec2 eps_prediction(const std::optional<std::string>& concept_id, Vec2 x_t, double alpha_bar) const;
    Vec2 eps_prediction(std::span<const double> weights, Vec2 x_t, double alpha_bar) const;

    /// log density of the diffused selected mixture at x_t.
    double diffused_log_density(const std::optional<std::string>& concept_id, Vec2 x_t, double alpha_bar) const;

    /// log density of x0 under the concept-restricted mixture.
    double concept_loglik(const std::string& concept_id, Vec2 x0) const;

    /// Euclidean distance from x to the closest component mean of the concept.
    double concept_distance(const std::string& concept_id, Vec2 x) const;

private:
    const std::vector<std::size_t>& components_of(const std::string& concept_id) const;

    std::vector<GmmComponent> components_;
    std::vector<double> weights_;
    std::map<std::string, std::vector<std::size_t>> concept_map_;
};

Vec2 analytic_x0_expectation(const GmmDomain& domain, const std::optional<std::string>& concept_id, Vec2 x_t,
                             double alpha_bar);
Vec2 analytic_eps(const GmmDomain& domain, const std::optional<std::string>& concept_id, Vec2 x_t,
                  double alpha_bar);
double concept_loglik(const GmmDomain& domain, const std::string& concept_id, Vec2 x0);

/// Result of nearest-centroid classification.
struct Classification {
    std::string concept_id;
    double margin = 0.0;  // (d2 - d1) / d2, 0 = tie, towards 1 = confident
};

/**
 * 16x16 grayscale glyphs: circle, cross, square, triangle.
 *
 * Base bitmaps (pixel centres at integer coordinates, canvas centre 7.5):
 *   circle    ring of pixels with distance to the centre in [4, 5.5]
 *   square    filled, side 10 (rows/cols 3..12)
 *   triangle  filled, apex at row 3, base row 12 (height 10), half-width (row-3+1)/2
 *   cross     plus sign, arms 10 long (3..12) and 2 thick (7..8)
 *
 * A rendered glyph shifts the base bitmap by (dy, dx) in {-1,0,1}^2 (two
 * next_below(3) draws, dy first) and adds N(0, 0.05^2) per pixel in row-major
 * order, clamped to [0, 1].
 */
class GlyphDomain {
public:
    static constexpr std::size_t kSide = 16;
    static constexpr std::size_t kPixels = kSide * kSide;
    static constexpr double kNoiseSigma = 0.05;
    /// Distance gap (relative above 1) below which two concepts tie; images are float, so this is float resolution.
    static constexpr double kTieTolerance = 1e-6;

    GlyphDomain();

    /// Lexicographic order.
    const std::vector<std::string>& concepts() const noexcept { return concepts_; }

    const Tensor& base_bitmap(const std::string& concept_id) const;

    /// Class mean: the base bitmap averaged over the nine jitter offsets.
    const Tensor& centroid(const std::string& concept_id) const;

    Tensor render(const std::string& concept_id, RngStream& stream) const;

    /// Renders with an explicit offset and no intensity noise.
    Tensor render_clean(const std::string& concept_id, int dy, int dx) const;

    /// Nearest class centroid in pixel L2 distance; exact ties resolve to the lexicographically smallest concept.
    Classification classify(const Tensor& image) const;

    /// L2 distance from the image to the concept's centroid.
    double centroid_distance(const Tensor& image, const std::string& concept_id) const;

private:
    std::size_t index_of(const std::string& concept_id) const;

    std::vector<std::string> concepts_;
    std::vector<Tensor> bitmaps_;
    std::vector<Tensor> centroids_;
};

Tensor glyph_render(const GlyphDomain& domain, const std::string& concept_id, RngStream& stream);
Classification glyph_centroid_classify(const Tensor& image, const GlyphDomain& domain);

/// Either concept world; training and evaluation dispatch on it.
using Domain = std::variant<GmmDomain, GlyphDomain>;

std::vector<std::string> domain_concepts(const Domain& domain);
std::size_t domain_data_dim(const Domain& domain);
std::string domain_kind(const Domain& domain);

/**
 * One training datum in diffusion space: raw coordinates for the GMM, pixels
 * mapped from [0,1] to [-1,1] for glyphs.
 */
std::vector<float> sample_diffusion_datum(const Domain& domain, const std::string& concept_id, RngStream& stream);

/// Maps diffusion-space glyph pixels back to [0,1] (clamped).
Tensor glyph_from_diffusion(std::span<const float> x);

} // namespace cblend
