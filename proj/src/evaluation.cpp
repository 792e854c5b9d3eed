#include "cblend/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cblend {

double sample_affinity(std::span<const float> sample, const Domain& domain, const std::string& concept_id) {
    if (const auto* g = std::get_if<GmmDomain>(&domain)) {
        if (sample.size() != 2) throw ShapeError("affinity: GMM samples have 2 coordinates");
        return g->concept_loglik(concept_id, Vec2{sample[0], sample[1]});
    }
    const auto& glyph = std::get<GlyphDomain>(domain);
    if (sample.size() != GlyphDomain::kPixels) throw ShapeError("affinity: glyph samples have 256 pixels");
    return -glyph.centroid_distance(Tensor(Shape{GlyphDomain::kPixels}, {sample.begin(), sample.end()}), concept_id);
}

double concept_affinity(const Tensor& samples, const Domain& domain, const std::string& concept_id) {
    if (samples.rank() != 2 || samples.dim(0) == 0) throw ContractError("concept_affinity: no samples");
    double sum = 0.0;
    for (std::size_t r = 0; r < samples.dim(0); ++r) sum += sample_affinity(samples.row(r), domain, concept_id);
    return sum / static_cast<double>(samples.dim(0));
}

Classification nearest_concept(std::span<const float> sample, const Domain& domain) {
    if (const auto* g = std::get_if<GmmDomain>(&domain)) {
        if (sample.size() != 2) throw ShapeError("nearest_concept: GMM samples have 2 coordinates");
        const Vec2 x{sample[0], sample[1]};
        const auto concepts = g->concepts();
        double d1 = INFINITY;
        double d2 = INFINITY;
        std::string best;
        for (const auto& c : concepts) {
            const double d = g->concept_distance(c, x);
            if (d < d1) {
                d2 = d1;
                d1 = d;
                best = c;
            } else if (d < d2) {
                d2 = d;
            }
        }
        const double margin = (std::isfinite(d2) && d2 > 0.0) ? (d2 - d1) / d2 : 0.0;
        return {best, margin};
    }
    const auto& glyph = std::get<GlyphDomain>(domain);
    return glyph.classify(Tensor(Shape{GlyphDomain::kPixels}, {sample.begin(), sample.end()}));
}

Tensor to_data_space(const Tensor& x, const Domain& domain) {
    if (std::holds_alternative<GmmDomain>(domain)) return x;
    // One image per row.
    Tensor out(x.shape());
    const std::size_t rows = x.rank() == 2 ? x.dim(0) : 1;
    const std::size_t width = x.size() / std::max<std::size_t>(rows, 1);
    for (std::size_t r = 0; r < rows; ++r) {
        const Tensor img = glyph_from_diffusion(x.data().subspan(r * width, width));
        std::copy(img.data().begin(), img.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(r * width));
    }
    return out;
}

void BlendProfile::aggregate() {
    const std::string& p1 = spec.p1;
    const std::string& p2 = spec.p2.empty() ? spec.p1 : spec.p2;
    std::size_t n1 = 0;
    std::size_t n2 = 0;
    double a1 = 0.0;
    double a2 = 0.0;
    for (const auto& r : records) {
        n1 += r.nearest == p1;
        n2 += r.nearest == p2;
        a1 += r.affinity1;
        a2 += r.affinity2;
    }
    const double n = records.empty() ? 1.0 : static_cast<double>(records.size());
    fraction_nearest_p1 = static_cast<double>(n1) / n;
    fraction_nearest_p2 = static_cast<double>(n2) / n;
    mean_affinity1 = a1 / n;
    mean_affinity2 = a2 / n;
}

CsvTable BlendProfile::records_csv() const {
    CsvTable t;
    t.header = {"seed", "sample_id", "nearest", "margin", "affinity_p1", "affinity_p2"};
    for (const auto& r : records) {
        t.rows.push_back({std::to_string(r.seed), std::to_string(r.sample_id), r.nearest, format_number(r.margin),
                          format_number(r.affinity1), format_number(r.affinity2)});
    }
    return t;
}

BlendProfile blend_profile(const EvalContext& ctx, const BlendSpec& spec, std::size_t n_samples,
                           std::span<const std::uint64_t> seeds) {
    if (n_samples == 0) throw ConfigError("blend_profile: n_samples must be at least 1");
    if (seeds.empty()) throw ConfigError("blend_profile: at least one seed is required");
    const BlendSchedule schedule = BlendSchedule::from_spec(spec, ctx.table);
    const std::string& p2 = spec.p2.empty() ? spec.p1 : spec.p2;
    const std::size_t dim = ctx.denoiser.data_dim();

    BlendProfile prof;
    prof.spec = spec;
    prof.samples = Tensor(Shape{n_samples * seeds.size(), dim});
    // Chunking keeps peak memory flat; rows do not depend on their batch.
    constexpr std::size_t kChunk = 250;
    std::size_t out_row = 0;
    for (std::uint64_t seed : seeds) {
        for (std::size_t first = 0; first < n_samples; first += kChunk) {
            std::vector<std::size_t> ids(std::min(kChunk, n_samples - first));
            std::iota(ids.begin(), ids.end(), first);
            const Tensor x = to_data_space(
                generate_batch(ctx.denoiser, schedule, ctx.schedule, ctx.sampler, seed, ids), ctx.domain);
            for (std::size_t r = 0; r < ids.size(); ++r, ++out_row) {
                const auto row = x.row(r);
                std::copy(row.begin(), row.end(), prof.samples.row(out_row).begin());
                const Classification c = nearest_concept(row, ctx.domain);
                prof.records.push_back({seed, ids[r], c.concept_id, c.margin,
                                        sample_affinity(row, ctx.domain, spec.p1),
                                        sample_affinity(row, ctx.domain, p2)});
            }
        }
    }
    prof.aggregate();
    return prof;
}

BlendSpec sweep_spec(BlendMethod method, double value, const std::string& p1, const std::string& p2,
                     std::size_t n_steps) {
    BlendSpec s;
    s.method = method;
    s.p1 = p1;
    s.p2 = p2;
    s.n_steps = n_steps;
    auto as_step = [&](const char* what) {
        if (!(value >= 0.0) || value > static_cast<double>(n_steps) || value != std::floor(value)) {
            throw ConfigError(std::string("sweep: ") + what + " must be an integer in [0, " + std::to_string(n_steps) +
                              "], got " + format_number(value));
        }
        return static_cast<std::size_t>(value);
    };
    switch (method) {
    case BlendMethod::switch_at: s.switch_step = as_step("switch step"); break;
    case BlendMethod::alternate: s.pattern = ratio_pattern(as_step("ratio count"), n_steps); break;
    case BlendMethod::textual:
        if (!(value >= 0.0 && value <= 1.0)) throw ConfigError("sweep: weight " + format_number(value) + " outside [0,1]");
        s.weight = value;
        break;
    default: throw ConfigError("sweep: method '" + std::string(method_name(method)) + "' has no sweep parameter");
    }
    return s;
}

SweepResult sweep(const EvalContext& ctx, BlendMethod method, std::span<const double> grid, const std::string& p1,
                  const std::string& p2, std::size_t n_samples, std::span<const std::uint64_t> seeds) {
    if (grid.empty()) throw ConfigError("sweep: parameter grid is empty");
    std::vector<BlendSpec> specs;
    for (double v : grid) specs.push_back(sweep_spec(method, v, p1, p2, ctx.sampler.n_steps));
    SweepResult out{method, {grid.begin(), grid.end()}, {}};
    for (const auto& s : specs) out.profiles.push_back(blend_profile(ctx, s, n_samples, seeds));
    return out;
}

CsvTable SweepResult::table() const {
    CsvTable t;
    t.header = {"param", "fraction_nearest_p1", "fraction_nearest_p2", "mean_affinity_p1", "mean_affinity_p2"};
    for (std::size_t i = 0; i < profiles.size(); ++i) {
        const auto& p = profiles[i];
        t.rows.push_back({format_number(grid[i]), format_number(p.fraction_nearest_p1),
                          format_number(p.fraction_nearest_p2), format_number(p.mean_affinity1),
                          format_number(p.mean_affinity2)});
    }
    return t;
}

namespace {

std::string pattern_string(const std::vector<bool>& pattern) {
    std::string s;
    for (bool b : pattern) s += b ? '1' : '2';
    return s;
}

} // namespace

CsvTable profiles_csv(std::span<const BlendProfile> profiles) {
    CsvTable t;
    t.header = {"method", "p1", "p2", "weight", "switch_step", "pattern", "variant", "n", "fraction_nearest_p1",
                "fraction_nearest_p2", "mean_affinity_p1", "mean_affinity_p2"};
    for (const auto& p : profiles) {
        const auto& s = p.spec;
        const bool textual = s.method == BlendMethod::textual;
        const bool sw = s.method == BlendMethod::switch_at;
        const bool alt = s.method == BlendMethod::alternate;
        const bool unet = s.method == BlendMethod::unet;
        t.rows.push_back({std::string(method_name(s.method)), s.p1, s.p2, textual ? format_number(s.weight) : "",
                          sw ? std::to_string(s.switch_step) : "", alt ? pattern_string(s.pattern) : "",
                          unet ? std::string(variant_name(s.variant)) : "", std::to_string(p.records.size()),
                          format_number(p.fraction_nearest_p1), format_number(p.fraction_nearest_p2),
                          format_number(p.mean_affinity1), format_number(p.mean_affinity2)});
    }
    return t;
}

std::vector<double> average_ranks(std::span<const double> v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
        i = j + 1;
    }
    return ranks;
}

double spearman_rho(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw ContractError("spearman_rho: need two equal-length series");
    const auto rx = average_ranks(x);
    const auto ry = average_ranks(y);
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
    const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

double binomial_half_width(double p, std::size_t n, double z) {
    if (n == 0) throw ContractError("binomial_half_width: n must be positive");
    return z * std::sqrt(p * (1.0 - p) / static_cast<double>(n));
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw ContractError("ks_statistic: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::size_t i = 0;
    std::size_t j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double v = std::min(a[i], b[j]);
        while (i < a.size() && a[i] == v) ++i;
        while (j < b.size() && b[j] == v) ++j;
        const double fa = static_cast<double>(i) / static_cast<double>(a.size());
        const double fb = static_cast<double>(j) / static_cast<double>(b.size());
        d = std::max(d, std::abs(fa - fb));
    }
    return d;
}

double ks_critical(std::size_t n, std::size_t m, double alpha) {
    if (n == 0 || m == 0 || !(alpha > 0.0 && alpha < 1.0)) throw ContractError("ks_critical: bad arguments");
    const double c = std::sqrt(-0.5 * std::log(alpha / 2.0));
    const double nn = static_cast<double>(n);
    const double mm = static_cast<double>(m);
    return c * std::sqrt((nn + mm) / (nn * mm));
}

} // namespace cblend
