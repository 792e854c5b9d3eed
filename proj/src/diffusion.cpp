#include "cblend/diffusion.hpp"

#include <algorithm>
#include <cmath>

namespace cblend {

NoiseSchedule linear_schedule(std::size_t t_train, double beta_min, double beta_max) {
    if (t_train == 0) throw ConfigError("linear_schedule: T_train must be positive");
    if (!(beta_min > 0.0 && beta_min <= beta_max && beta_max < 1.0)) {
        throw ConfigError("linear_schedule: need 0 < beta_min <= beta_max < 1");
    }
    NoiseSchedule s;
    s.betas.resize(t_train);
    s.alphas.resize(t_train);
    s.alpha_bars.resize(t_train);
    double prod = 1.0;
    for (std::size_t t = 0; t < t_train; ++t) {
        const double frac = t_train == 1 ? 0.0 : static_cast<double>(t) / static_cast<double>(t_train - 1);
        s.betas[t] = beta_min + (beta_max - beta_min) * frac;
        s.alphas[t] = 1.0 - s.betas[t];
        prod *= s.alphas[t];
        s.alpha_bars[t] = prod;
    }
    return s;
}

std::vector<int> timestep_grid(std::size_t t_train, std::size_t n_steps) {
    if (n_steps < 2) throw ConfigError("timestep_grid: n_steps must be at least 2");
    if (n_steps > t_train) {
        throw ConfigError("timestep_grid: n_steps " + std::to_string(n_steps) + " exceeds T_train " +
                          std::to_string(t_train));
    }
    std::vector<int> grid(n_steps);
    const double top = static_cast<double>(t_train - 1);
    for (std::size_t i = 0; i < n_steps; ++i) {
        const double frac = static_cast<double>(i) / static_cast<double>(n_steps - 1);
        grid[i] = static_cast<int>(std::lround(top * (1.0 - frac)));
    }
    return grid;
}

std::string_view sampler_name(SamplerKind k) { return k == SamplerKind::ddpm ? "ddpm" : "ddim"; }

SamplerKind parse_sampler(std::string_view name) {
    if (name == "ddpm") return SamplerKind::ddpm;
    if (name == "ddim") return SamplerKind::ddim;
    throw ConfigError("unknown sampler '" + std::string(name) + "'");
}

SamplerConfig SamplerConfig::gmm_defaults() {
    SamplerConfig c;
    c.guidance_scale = 1.0;
    return c;
}

SamplerConfig SamplerConfig::glyph_defaults() {
    SamplerConfig c;
    c.guidance_scale = 7.5;
    c.clip_min = -1.0;
    c.clip_max = 1.0;
    return c;
}

void SamplerConfig::validate(std::size_t t_train) const {
    if (n_steps < 2 || n_steps > t_train) {
        throw ConfigError("sampler: n_steps " + std::to_string(n_steps) + " outside [2, " + std::to_string(t_train) +
                          "]");
    }
    if (!(guidance_scale >= 0.0)) throw ConfigError("sampler: guidance scale must be >= 0");
    if (!(eta >= 0.0)) throw ConfigError("sampler: eta must be >= 0");
    if (!(clip_min < clip_max)) throw ConfigError("sampler: clip_min must be below clip_max");
}

std::pair<Tensor, Tensor> forward_diffuse(const Tensor& x0, int t, const NoiseSchedule& schedule, RngStream& stream) {
    if (t < 0 || static_cast<std::size_t>(t) >= schedule.t_train()) {
        throw ContractError("forward_diffuse: timestep " + std::to_string(t) + " out of range");
    }
    Tensor eps = gaussian_tensor(stream, x0.shape().empty() ? Shape{1} : x0.shape());
    eps = eps.reshaped(x0.shape());
    const double ab = schedule.alpha_bar(t);
    const double sa = std::sqrt(ab);
    const double sn = std::sqrt(1.0 - ab);
    Tensor xt(x0.shape());
    for (std::size_t i = 0; i < x0.size(); ++i) {
        xt[i] = static_cast<float>(sa * static_cast<double>(x0[i]) + sn * static_cast<double>(eps[i]));
    }
    return {std::move(xt), std::move(eps)};
}

Tensor cfg_combine(const Tensor& eps_uncond, const Tensor& eps_cond, double scale) {
    if (eps_uncond.shape() != eps_cond.shape()) {
        throw ShapeError("cfg_combine: shapes " + shape_string(eps_uncond.shape()) + " and " +
                         shape_string(eps_cond.shape()) + " differ");
    }
    if (scale == 1.0) return eps_cond;
    if (scale == 0.0) return eps_uncond;
    Tensor out(eps_cond.shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double u = eps_uncond[i];
        out[i] = static_cast<float>(u + scale * (static_cast<double>(eps_cond[i]) - u));
    }
    return out;
}

Tensor reverse_step(const Tensor& x_t, const Tensor& eps_hat, int t, int t_prev, const NoiseSchedule& schedule,
                    const SamplerConfig& config, std::span<RngStream> streams) {
    if (x_t.shape() != eps_hat.shape() || x_t.rank() != 2) {
        throw ShapeError("reverse_step: x_t " + shape_string(x_t.shape()) + " and eps " +
                         shape_string(eps_hat.shape()) + " must be equal [B,D]");
    }
    if (t_prev != kFinalStep && t_prev >= t) {
        throw ContractError("reverse_step: t_prev " + std::to_string(t_prev) + " must precede t " + std::to_string(t));
    }
    if (t_prev < kFinalStep) throw ContractError("reverse_step: invalid t_prev");
    const std::size_t rows = x_t.dim(0);
    const std::size_t cols = x_t.dim(1);
    const bool final_step = t_prev == kFinalStep;
    const bool stochastic =
        !final_step && (config.kind == SamplerKind::ddpm || (config.kind == SamplerKind::ddim && config.eta > 0.0));
    if (stochastic && streams.size() != rows) {
        throw ContractError("reverse_step: need one noise stream per row");
    }

    const double ab = schedule.alpha_bar(t);
    const double sa = std::sqrt(ab);
    const double sn = std::sqrt(1.0 - ab);
    const double ab_prev = final_step ? 1.0 : schedule.alpha_bar(t_prev);

    Tensor out(x_t.shape());
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            const std::size_t i = r * cols + c;
            const double x = x_t[i];
            double eps = eps_hat[i];
            double x0 = (x - sn * eps) / sa;
            if (x0 < config.clip_min || x0 > config.clip_max) {
                x0 = std::clamp(x0, config.clip_min, config.clip_max);
                eps = (x - sa * x0) / sn;
            }
            if (final_step) {
                out[i] = static_cast<float>(x0);
                continue;
            }
            double next = 0.0;
            if (config.kind == SamplerKind::ddpm) {
                const double beta_eff = 1.0 - ab / ab_prev;
                const double c0 = std::sqrt(ab_prev) * beta_eff / (1.0 - ab);
                const double ct = std::sqrt(ab / ab_prev) * (1.0 - ab_prev) / (1.0 - ab);
                const double sigma = std::sqrt((1.0 - ab_prev) / (1.0 - ab) * beta_eff);
                next = c0 * x0 + ct * x + sigma * streams[r].next_gaussian();
            } else {
                const double sigma =
                    config.eta * std::sqrt((1.0 - ab_prev) / (1.0 - ab)) * std::sqrt(1.0 - ab / ab_prev);
                next = std::sqrt(ab_prev) * x0 + std::sqrt(std::max(0.0, 1.0 - ab_prev - sigma * sigma)) * eps;
                if (sigma > 0.0) next += sigma * streams[r].next_gaussian();
            }
            out[i] = static_cast<float>(next);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

NetDenoiser::NetDenoiser(BlockConditionalDenoiser<float> net, ConceptEmbedding null_embedding)
    : net_(std::move(net)), null_(std::move(null_embedding)) {
    if (null_.size() != net_.dims().embed) throw ShapeError("NetDenoiser: null embedding width mismatch");
}

Tensor NetDenoiser::predict_eps(const Tensor& x_t, std::span<const int> timesteps, std::span<const float> enc,
                                std::span<const float> mid, std::span<const float> dec) const {
    const std::size_t batch = x_t.rank() == 2 ? x_t.dim(0) : 0;
    return net_.predict_eps(x_t, timesteps, broadcast_conditioning<float>(enc, mid, dec, batch));
}

GmmOracleDenoiser::GmmOracleDenoiser(GmmDomain domain, NoiseSchedule schedule)
    : domain_(std::move(domain)), schedule_(std::move(schedule)), concepts_(domain_.concepts()) {}

std::vector<double> GmmOracleDenoiser::component_weights(std::span<const float> embedding) const {
    if (embedding.size() != concepts_.size()) {
        throw ShapeError("oracle: embedding width " + std::to_string(embedding.size()) + ", expected " +
                         std::to_string(concepts_.size()));
    }
    const auto& prior = domain_.weights();
    std::vector<double> w(prior.size(), 0.0);
    bool any = false;
    for (std::size_t c = 0; c < concepts_.size(); ++c) {
        const double e = std::max(0.0, static_cast<double>(embedding[c]));
        if (e == 0.0) continue;
        any = true;
        for (auto k : domain_.concept_map().at(concepts_[c])) w[k] += e * prior[k];
    }
    return any ? w : prior;
}

Tensor GmmOracleDenoiser::predict_eps(const Tensor& x_t, std::span<const int> timesteps, std::span<const float> enc,
                                      std::span<const float> mid, std::span<const float> dec) const {
    if (x_t.rank() != 2 || x_t.dim(1) != 2) throw ShapeError("oracle: expected [B,2], got " + shape_string(x_t.shape()));
    if (timesteps.size() != x_t.dim(0)) throw ShapeError("oracle: one timestep per row required");
    std::vector<double> weights;
    if (std::ranges::equal(enc, mid) && std::ranges::equal(mid, dec)) {
        weights = component_weights(enc);
    } else {
        ConceptEmbedding mean(enc.size());
        for (std::size_t i = 0; i < mean.size(); ++i) {
            mean[i] = static_cast<float>((static_cast<double>(enc[i]) + mid[i] + dec[i]) / 3.0);
        }
        weights = component_weights(mean);
    }
    Tensor out(x_t.shape());
    for (std::size_t r = 0; r < x_t.dim(0); ++r) {
        const Vec2 x{x_t.at(r, 0), x_t.at(r, 1)};
        const Vec2 e = domain_.eps_prediction(weights, x, schedule_.alpha_bar(timesteps[r]));
        out.at(r, 0) = static_cast<float>(e[0]);
        out.at(r, 1) = static_cast<float>(e[1]);
    }
    return out;
}

EmbeddingTable oracle_embeddings(const GmmDomain& domain) {
    const auto concepts = domain.concepts();
    const std::size_t n = concepts.size();
    Tensor rows(Shape{n + 1, n});
    for (std::size_t c = 0; c < n; ++c) rows.at(c, c) = 1.0f;
    return EmbeddingTable(ConceptVocab(concepts), std::move(rows));
}

// ---------------------------------------------------------------------------

std::string init_latent_label(std::size_t sample_id) { return "init-latent/" + std::to_string(sample_id); }
std::string ddpm_noise_label(std::size_t sample_id) { return "ddpm-noise/" + std::to_string(sample_id); }

namespace {

Tensor run_pipeline(const Denoiser& denoiser, const BlendSchedule& blend, const NoiseSchedule& schedule,
                    const SamplerConfig& config, std::uint64_t seed, std::span<const std::size_t> sample_ids,
                    bool with_uncond) {
    config.validate(schedule.t_train());
    if (blend.n_steps() != config.n_steps) {
        throw ContractError("generate: blend schedule built for " + std::to_string(blend.n_steps()) +
                            " steps, sampler runs " + std::to_string(config.n_steps));
    }
    if (sample_ids.empty()) throw ContractError("generate: no sample ids");
    const std::size_t dim = denoiser.data_dim();
    const std::size_t batch = sample_ids.size();
    const auto grid = timestep_grid(schedule.t_train(), config.n_steps);

    Tensor x(Shape{batch, dim});
    std::vector<RngStream> noise;
    noise.reserve(batch);
    for (std::size_t r = 0; r < batch; ++r) {
        auto init = RngStream::derive(seed, init_latent_label(sample_ids[r]));
        const Tensor z = gaussian_tensor(init, {dim});
        std::copy(z.data().begin(), z.data().end(), x.row(r).begin());
        noise.push_back(RngStream::derive(seed, ddpm_noise_label(sample_ids[r])));
    }

    const ConceptEmbedding null = denoiser.null_embedding();
    std::vector<int> ts(batch);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        std::fill(ts.begin(), ts.end(), grid[i]);
        Tensor eps = denoiser.predict_eps(x, ts, blend.at(i, Block::enc), blend.at(i, Block::mid),
                                          blend.at(i, Block::dec));
        if (with_uncond) {
            const Tensor eps_uncond = denoiser.predict_eps(x, ts, null, null, null);
            eps = cfg_combine(eps_uncond, eps, config.guidance_scale);
        }
        const int t_prev = i + 1 < grid.size() ? grid[i + 1] : kFinalStep;
        x = reverse_step(x, eps, grid[i], t_prev, schedule, config, noise);
    }
    return x;
}

} // namespace

Tensor generate_batch(const Denoiser& denoiser, const BlendSchedule& blend, const NoiseSchedule& schedule,
                      const SamplerConfig& config, std::uint64_t seed, std::span<const std::size_t> sample_ids) {
    return run_pipeline(denoiser, blend, schedule, config, seed, sample_ids, true);
}

Tensor generate(const Denoiser& denoiser, const BlendSchedule& blend, const NoiseSchedule& schedule,
                const SamplerConfig& config, std::uint64_t seed, std::size_t sample_id) {
    const std::size_t ids[1] = {sample_id};
    Tensor x = run_pipeline(denoiser, blend, schedule, config, seed, ids, true);
    return x.reshaped(Shape{x.dim(1)});
}

Tensor generate_conditional_only(const Denoiser& denoiser, const BlendSchedule& blend, const NoiseSchedule& schedule,
                                 const SamplerConfig& config, std::uint64_t seed,
                                 std::span<const std::size_t> sample_ids) {
    return run_pipeline(denoiser, blend, schedule, config, seed, sample_ids, false);
}

} // namespace cblend
