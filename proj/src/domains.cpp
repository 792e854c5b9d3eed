#include "cblend/domains.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace cblend {
namespace {

double log_sum_exp(std::span<const double> xs) {
    double hi = -std::numeric_limits<double>::infinity();
    for (double x : xs) hi = std::max(hi, x);
    if (!std::isfinite(hi)) return hi;
    double s = 0.0;
    for (double x : xs) s += std::exp(x - hi);
    return hi + std::log(s);
}

void check_alpha_bar(double alpha_bar, bool allow_one) {
    const bool ok = alpha_bar > 0.0 && (allow_one ? alpha_bar <= 1.0 : alpha_bar < 1.0);
    if (!ok) {
        throw ContractError("alpha_bar " + std::to_string(alpha_bar) + " outside " +
                            (allow_one ? "(0, 1]" : "(0, 1)"));
    }
}

} // namespace

GmmDomain::GmmDomain(std::vector<GmmComponent> components, std::vector<double> weights,
                     std::map<std::string, std::vector<std::size_t>> concept_map)
    : components_(std::move(components)), weights_(std::move(weights)), concept_map_(std::move(concept_map)) {
    if (components_.empty() || components_.size() != weights_.size()) {
        throw ConfigError("gmm: need one weight per component");
    }
    double total = 0.0;
    for (double w : weights_) {
        if (!(w >= 0.0)) throw ConfigError("gmm: weights must be non-negative");
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw ConfigError("gmm: weights sum to " + std::to_string(total) + ", expected 1");
    }
    for (const auto& c : components_) {
        if (!(c.variance > 0.0)) throw ConfigError("gmm: variances must be positive");
    }
    for (const auto& [name, members] : concept_map_) {
        if (members.empty()) throw ConfigError("gmm: concept '" + name + "' has no components");
        for (auto k : members) {
            if (k >= components_.size()) {
                throw ConfigError("gmm: concept '" + name + "' references component " + std::to_string(k));
            }
        }
    }
}

GmmDomain GmmDomain::default_world() {
    return GmmDomain({{{-4.0, 0.0}, 0.25}, {{4.0, 0.0}, 0.25}, {{0.0, 4.0}, 0.25}}, {1.0 / 3, 1.0 / 3, 1.0 / 3},
                     {{"A", {0}}, {"B", {1}}, {"C", {2}}});
}

std::vector<std::string> GmmDomain::concepts() const {
    std::vector<std::string> out;
    for (const auto& [name, _] : concept_map_) out.push_back(name);
    return out;
}

const std::vector<std::size_t>& GmmDomain::components_of(const std::string& concept_id) const {
    auto it = concept_map_.find(concept_id);
    if (it == concept_map_.end()) throw LookupError("gmm: unknown concept '" + concept_id + "'");
    return it->second;
}

std::vector<double> GmmDomain::concept_weights(const std::optional<std::string>& concept_id) const {
    if (!concept_id) return weights_;
    std::vector<double> w(weights_.size(), 0.0);
    for (auto k : components_of(*concept_id)) w[k] = weights_[k];
    return w;
}

std::vector<Vec2> GmmDomain::sample(const std::string& concept_id, std::size_t n, RngStream& stream) const {
    const auto& members = components_of(concept_id);
    double total = 0.0;
    for (auto k : members) total += weights_[k];
    std::vector<Vec2> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t pick = members.back();
        if (members.size() > 1) {
            const double u = stream.next_uniform() * total;
            double cum = 0.0;
            for (auto k : members) {
                cum += weights_[k];
                if (u < cum) {
                    pick = k;
                    break;
                }
            }
        }
        const auto& c = components_[pick];
        const double sd = std::sqrt(c.variance);
        const double z0 = stream.next_gaussian();
        const double z1 = stream.next_gaussian();
        out.push_back({c.mean[0] + sd * z0, c.mean[1] + sd * z1});
    }
    return out;
}

Vec2 GmmDomain::x0_expectation(std::span<const double> weights, Vec2 x_t, double alpha_bar) const {
    check_alpha_bar(alpha_bar, true);
    if (weights.size() != components_.size()) {
        throw ShapeError("gmm: " + std::to_string(weights.size()) + " weights for " +
                         std::to_string(components_.size()) + " components");
    }
    if (alpha_bar == 1.0) return x_t;
    const double sa = std::sqrt(alpha_bar);
    std::vector<double> logr(components_.size(), -std::numeric_limits<double>::infinity());
    std::vector<Vec2> means(components_.size());
    for (std::size_t k = 0; k < components_.size(); ++k) {
        const auto& c = components_[k];
        const double s2 = std::max(c.variance, kVarianceFloor);
        const double v = alpha_bar * s2 + (1.0 - alpha_bar);
        const double d0 = x_t[0] - sa * c.mean[0];
        const double d1 = x_t[1] - sa * c.mean[1];
        const double gain = sa * s2 / v;
        means[k] = {c.mean[0] + gain * d0, c.mean[1] + gain * d1};
        if (weights[k] > 0.0) {
            logr[k] = std::log(weights[k]) - 0.5 * (d0 * d0 + d1 * d1) / v - std::log(2.0 * std::numbers::pi * v);
        }
    }
    const double norm = log_sum_exp(logr);
    if (!std::isfinite(norm)) throw ContractError("gmm: component weights are all zero");
    Vec2 out{0.0, 0.0};
    for (std::size_t k = 0; k < components_.size(); ++k) {
        if (!std::isfinite(logr[k])) continue;
        const double r = std::exp(logr[k] - norm);
        out[0] += r * means[k][0];
        out[1] += r * means[k][1];
    }
    return out;
}

Vec2 GmmDomain::x0_expectation(const std::optional<std::string>& concept_id, Vec2 x_t, double alpha_bar) const {
    const auto w = concept_weights(concept_id);
    return x0_expectation(w, x_t, alpha_bar);
}

Vec2 GmmDomain::eps_prediction(std::span<const double> weights, Vec2 x_t, double alpha_bar) const {
    check_alpha_bar(alpha_bar, false);
    const Vec2 x0 = x0_expectation(weights, x_t, alpha_bar);
    const double sa = std::sqrt(alpha_bar);
    const double sn = std::sqrt(1.0 - alpha_bar);
    return {(x_t[0] - sa * x0[0]) / sn, (x_t[1] - sa * x0[1]) / sn};
}

Vec2 GmmDomain::eps_prediction(const std::optional<std::string>& concept_id, Vec2 x_t, double alpha_bar) const {
    const auto w = concept_weights(concept_id);
    return eps_prediction(w, x_t, alpha_bar);
}

double GmmDomain::diffused_log_density(const std::optional<std::string>& concept_id, Vec2 x_t,
                                       double alpha_bar) const {
    check_alpha_bar(alpha_bar, true);
    auto w = concept_weights(concept_id);
    double total = 0.0;
    for (double x : w) total += x;
    const double sa = std::sqrt(alpha_bar);
    std::vector<double> terms;
    for (std::size_t k = 0; k < components_.size(); ++k) {
        if (w[k] <= 0.0) continue;
        const auto& c = components_[k];
        const double v = alpha_bar * std::max(c.variance, kVarianceFloor) + (1.0 - alpha_bar);
        const double d0 = x_t[0] - sa * c.mean[0];
        const double d1 = x_t[1] - sa * c.mean[1];
        terms.push_back(std::log(w[k] / total) - 0.5 * (d0 * d0 + d1 * d1) / v - std::log(2.0 * std::numbers::pi * v));
    }
    return log_sum_exp(terms);
}

double GmmDomain::concept_loglik(const std::string& concept_id, Vec2 x0) const {
    return diffused_log_density(concept_id, x0, 1.0);
}

double GmmDomain::concept_distance(const std::string& concept_id, Vec2 x) const {
    double best = std::numeric_limits<double>::infinity();
    for (auto k : components_of(concept_id)) {
        const auto& m = components_[k].mean;
        best = std::min(best, std::hypot(x[0] - m[0], x[1] - m[1]));
    }
    return best;
}

Vec2 analytic_x0_expectation(const GmmDomain& domain, const std::optional<std::string>& concept_id, Vec2 x_t,
                             double alpha_bar) {
    return domain.x0_expectation(concept_id, x_t, alpha_bar);
}

Vec2 analytic_eps(const GmmDomain& domain, const std::optional<std::string>& concept_id, Vec2 x_t,
                  double alpha_bar) {
    return domain.eps_prediction(concept_id, x_t, alpha_bar);
}

double concept_loglik(const GmmDomain& domain, const std::string& concept_id, Vec2 x0) {
    return domain.concept_loglik(concept_id, x0);
}

// ---------------------------------------------------------------------------

namespace {

Tensor make_bitmap(const std::string& name) {
    constexpr int n = static_cast<int>(GlyphDomain::kSide);
    Tensor img(Shape{GlyphDomain::kSide, GlyphDomain::kSide});
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
            bool on = false;
            if (name == "circle") {
                const double d = std::hypot(r - 7.5, c - 7.5);
                on = d >= 4.0 && d <= 5.5;
            } else if (name == "square") {
                on = r >= 3 && r <= 12 && c >= 3 && c <= 12;
            } else if (name == "triangle") {
                on = r >= 3 && r <= 12 && std::abs(c - 7.5) <= (r - 3 + 1) / 2.0;
            } else if (name == "cross") {
                on = (r >= 3 && r <= 12 && c >= 7 && c <= 8) || (c >= 3 && c <= 12 && r >= 7 && r <= 8);
            }
            img.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = on ? 1.0f : 0.0f;
        }
    }
    return img;
}

Tensor shifted(const Tensor& base, int dy, int dx) {
    constexpr int n = static_cast<int>(GlyphDomain::kSide);
    Tensor out(base.shape());
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
            const int sr = r - dy;
            const int sc = c - dx;
            if (sr >= 0 && sr < n && sc >= 0 && sc < n) {
                out.at(r, c) = base.at(sr, sc);
            }
        }
    }
    return out;
}

} // namespace

GlyphDomain::GlyphDomain() : concepts_{"circle", "cross", "square", "triangle"} {
    for (const auto& name : concepts_) {
        Tensor base = make_bitmap(name);
        std::vector<double> acc(kPixels, 0.0);
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                const Tensor s = shifted(base, dy, dx);
                for (std::size_t i = 0; i < kPixels; ++i) acc[i] += s[i];
            }
        Tensor centroid(base.shape());
        for (std::size_t i = 0; i < kPixels; ++i) centroid[i] = static_cast<float>(acc[i] / 9.0);
        bitmaps_.push_back(std::move(base));
        centroids_.push_back(std::move(centroid));
    }
}

std::size_t GlyphDomain::index_of(const std::string& concept_id) const {
    auto it = std::find(concepts_.begin(), concepts_.end(), concept_id);
    if (it == concepts_.end()) throw LookupError("glyph: unknown concept '" + concept_id + "'");
    return static_cast<std::size_t>(it - concepts_.begin());
}

const Tensor& GlyphDomain::base_bitmap(const std::string& concept_id) const { return bitmaps_[index_of(concept_id)]; }

const Tensor& GlyphDomain::centroid(const std::string& concept_id) const { return centroids_[index_of(concept_id)]; }

Tensor GlyphDomain::render_clean(const std::string& concept_id, int dy, int dx) const {
    return shifted(base_bitmap(concept_id), dy, dx);
}

Tensor GlyphDomain::render(const std::string& concept_id, RngStream& stream) const {
    const std::size_t idx = index_of(concept_id);
    const int dy = static_cast<int>(stream.next_below(3)) - 1;
    const int dx = static_cast<int>(stream.next_below(3)) - 1;
    Tensor img = shifted(bitmaps_[idx], dy, dx);
    for (auto& v : img.data()) {
        const double noisy = static_cast<double>(v) + kNoiseSigma * stream.next_gaussian();
        v = static_cast<float>(std::clamp(noisy, 0.0, 1.0));
    }
    return img;
}

double GlyphDomain::centroid_distance(const Tensor& image, const std::string& concept_id) const {
    if (image.size() != kPixels) {
        throw ShapeError("glyph: expected 256 pixels, got shape " + shape_string(image.shape()));
    }
    const Tensor& c = centroid(concept_id);
    double s = 0.0;
    for (std::size_t i = 0; i < kPixels; ++i) {
        const double d = static_cast<double>(image[i]) - static_cast<double>(c[i]);
        s += d * d;
    }
    return std::sqrt(s);
}

Classification GlyphDomain::classify(const Tensor& image) const {
    std::vector<double> d;
    for (const auto& name : concepts_) d.push_back(centroid_distance(image, name));
    std::size_t best = 0;
    for (std::size_t i = 1; i < d.size(); ++i)
        if (d[i] < d[best]) best = i;
    double second = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < d.size(); ++i)
        if (i != best) second = std::min(second, d[i]);
    // Distances equal up to float resolution count as a tie: the
    // lexicographically first of the tied concepts wins with margin 0.
    const double tie = kTieTolerance * std::max(1.0, second);
    if (second - d[best] <= tie) {
        for (std::size_t i = 0; i < d.size(); ++i) {
            if (d[i] - d[best] <= tie) return {concepts_[i], 0.0};
        }
    }
    const double margin = second > 0.0 ? (second - d[best]) / second : 0.0;
    return {concepts_[best], margin};
}

Tensor glyph_render(const GlyphDomain& domain, const std::string& concept_id, RngStream& stream) {
    return domain.render(concept_id, stream);
}

Classification glyph_centroid_classify(const Tensor& image, const GlyphDomain& domain) {
    return domain.classify(image);
}

// ---------------------------------------------------------------------------

std::vector<std::string> domain_concepts(const Domain& domain) {
    return std::visit([](const auto& d) { return std::vector<std::string>(d.concepts()); }, domain);
}

std::size_t domain_data_dim(const Domain& domain) {
    return std::holds_alternative<GmmDomain>(domain) ? 2 : GlyphDomain::kPixels;
}

std::string domain_kind(const Domain& domain) { return std::holds_alternative<GmmDomain>(domain) ? "gmm" : "glyph"; }

std::vector<float> sample_diffusion_datum(const Domain& domain, const std::string& concept_id, RngStream& stream) {
    if (const auto* gmm = std::get_if<GmmDomain>(&domain)) {
        const auto x = gmm->sample(concept_id, 1, stream)[0];
        return {static_cast<float>(x[0]), static_cast<float>(x[1])};
    }
    const Tensor img = std::get<GlyphDomain>(domain).render(concept_id, stream);
    std::vector<float> out(img.size());
    for (std::size_t i = 0; i < img.size(); ++i) out[i] = 2.0f * img[i] - 1.0f;
    return out;
}

Tensor glyph_from_diffusion(std::span<const float> x) {
    if (x.size() != GlyphDomain::kPixels) {
        throw ShapeError("glyph: expected 256 values, got " + std::to_string(x.size()));
    }
    Tensor img(Shape{GlyphDomain::kSide, GlyphDomain::kSide});
    for (std::size_t i = 0; i < x.size(); ++i) {
        img[i] = std::clamp((x[i] + 1.0f) * 0.5f, 0.0f, 1.0f);
    }
    return img;
}

} // namespace cblend
