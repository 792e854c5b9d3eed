#include "cblend/blend.hpp"

#include <utility>

namespace cblend {
namespace {

constexpr std::array<std::pair<BlendMethod, std::string_view>, 5> kMethods{{
    {BlendMethod::single, "single"},
    {BlendMethod::textual, "textual"},
    {BlendMethod::switch_at, "switch"},
    {BlendMethod::alternate, "alternate"},
    {BlendMethod::unet, "unet"},
}};

void check_steps(std::size_t n_steps) {
    if (n_steps == 0) throw ConfigError("blend schedule: n_steps must be positive");
}

void check_widths(const Prompt& a, const Prompt& b) {
    if (a.embedding.size() != b.embedding.size()) {
        throw ShapeError("blend schedule: prompt embeddings '" + a.id + "' and '" + b.id + "' differ in width");
    }
}

} // namespace

std::string_view method_name(BlendMethod m) {
    for (const auto& [k, n] : kMethods)
        if (k == m) return n;
    return "?";
}

BlendMethod parse_method(std::string_view name) {
    for (const auto& [k, n] : kMethods)
        if (n == name) return k;
    throw ConfigError("unknown blend method '" + std::string(name) + "'");
}

std::string_view variant_name(UnetVariant v) { return v == UnetVariant::enc2_dec1 ? "enc2_dec1" : "enc1_dec2"; }

UnetVariant parse_variant(std::string_view name) {
    if (name == "enc2_dec1") return UnetVariant::enc2_dec1;
    if (name == "enc1_dec2") return UnetVariant::enc1_dec2;
    throw ConfigError("unknown unet variant '" + std::string(name) + "'");
}

std::vector<bool> ratio_pattern(std::size_t k, std::size_t n) {
    if (k > n) throw ConfigError("ratio_pattern: k=" + std::to_string(k) + " exceeds n=" + std::to_string(n));
    std::vector<bool> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = ((i + 1) * k) / n > (i * k) / n;
    return out;
}

std::vector<bool> parity_pattern(std::size_t n) {
    std::vector<bool> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = i % 2 == 0;
    return out;
}

void BlendSchedule::fill(std::size_t step, std::uint8_t enc, std::uint8_t mid, std::uint8_t dec) {
    steps_[step] = {enc, mid, dec};
}

BlendSchedule BlendSchedule::single(const Prompt& p, std::size_t n_steps) {
    check_steps(n_steps);
    BlendSpec spec;
    spec.method = BlendMethod::single;
    spec.p1 = p.id;
    spec.n_steps = n_steps;
    BlendSchedule s(std::move(spec), {p.embedding});
    s.steps_.assign(n_steps, {0, 0, 0});
    return s;
}

BlendSchedule BlendSchedule::textual(const Prompt& p1, const Prompt& p2, double w, std::size_t n_steps) {
    check_steps(n_steps);
    check_widths(p1, p2);
    if (!(w >= 0.0 && w <= 1.0)) throw ConfigError("textual: weight " + std::to_string(w) + " outside [0,1]");
    BlendSpec spec;
    spec.method = BlendMethod::textual;
    spec.p1 = p1.id;
    spec.p2 = p2.id;
    spec.weight = w;
    spec.n_steps = n_steps;
    BlendSchedule s(std::move(spec), {blend_embeddings(p1.embedding, p2.embedding, w)});
    s.steps_.assign(n_steps, {0, 0, 0});
    return s;
}

BlendSchedule BlendSchedule::switch_at(const Prompt& p1, const Prompt& p2, std::size_t switch_step,
                                       std::size_t n_steps) {
    check_steps(n_steps);
    check_widths(p1, p2);
    if (switch_step > n_steps) {
        throw ConfigError("switch: switch_step " + std::to_string(switch_step) + " exceeds n_steps " +
                          std::to_string(n_steps));
    }
    BlendSpec spec;
    spec.method = BlendMethod::switch_at;
    spec.p1 = p1.id;
    spec.p2 = p2.id;
    spec.switch_step = switch_step;
    spec.n_steps = n_steps;
    BlendSchedule s(std::move(spec), {p1.embedding, p2.embedding});
    s.steps_.resize(n_steps);
    for (std::size_t i = 0; i < n_steps; ++i) {
        const std::uint8_t e = i < switch_step ? 0 : 1;
        s.fill(i, e, e, e);
    }
    return s;
}

BlendSchedule BlendSchedule::alternate(const Prompt& p1, const Prompt& p2, std::optional<std::vector<bool>> pattern,
                                       std::size_t n_steps) {
    check_steps(n_steps);
    check_widths(p1, p2);
    std::vector<bool> pat = pattern ? std::move(*pattern) : parity_pattern(n_steps);
    if (pat.size() != n_steps) {
        throw ConfigError("alternate: pattern length " + std::to_string(pat.size()) + " differs from n_steps " +
                          std::to_string(n_steps));
    }
    BlendSpec spec;
    spec.method = BlendMethod::alternate;
    spec.p1 = p1.id;
    spec.p2 = p2.id;
    spec.pattern = pat;
    spec.n_steps = n_steps;
    BlendSchedule s(std::move(spec), {p1.embedding, p2.embedding});
    s.steps_.resize(n_steps);
    for (std::size_t i = 0; i < n_steps; ++i) {
        const std::uint8_t e = pat[i] ? 0 : 1;
        s.fill(i, e, e, e);
    }
    return s;
}

BlendSchedule BlendSchedule::unet(const Prompt& p1, const Prompt& p2, UnetVariant variant, std::size_t n_steps) {
    check_steps(n_steps);
    check_widths(p1, p2);
    BlendSpec spec;
    spec.method = BlendMethod::unet;
    spec.p1 = p1.id;
    spec.p2 = p2.id;
    spec.variant = variant;
    spec.n_steps = n_steps;
    BlendSchedule s(std::move(spec), {p1.embedding, p2.embedding});
    // The bottleneck keeps p1 in both variants.
    const std::array<std::uint8_t, 3> blocks =
        variant == UnetVariant::enc2_dec1 ? std::array<std::uint8_t, 3>{1, 0, 0} : std::array<std::uint8_t, 3>{0, 0, 1};
    s.steps_.assign(n_steps, blocks);
    return s;
}

BlendSchedule BlendSchedule::from_spec(const BlendSpec& spec, const EmbeddingTable& table) {
    const Prompt p1{spec.p1, table.encode(spec.p1)};
    if (spec.method == BlendMethod::single) return single(p1, spec.n_steps);
    const Prompt p2{spec.p2, table.encode(spec.p2)};
    switch (spec.method) {
    case BlendMethod::textual: return textual(p1, p2, spec.weight, spec.n_steps);
    case BlendMethod::switch_at: return switch_at(p1, p2, spec.switch_step, spec.n_steps);
    case BlendMethod::alternate:
        return alternate(p1, p2, spec.pattern.empty() ? std::nullopt : std::optional(spec.pattern), spec.n_steps);
    case BlendMethod::unet: return unet(p1, p2, spec.variant, spec.n_steps);
    default: break;
    }
    throw ConfigError("from_spec: unsupported method");
}

const ConceptEmbedding& BlendSchedule::at(std::size_t step, Block block) const {
    if (step >= steps_.size()) {
        throw ContractError("blend schedule: step " + std::to_string(step) + " outside [0," +
                            std::to_string(steps_.size()) + ")");
    }
    return pool_[steps_[step][static_cast<std::size_t>(block)]];
}

bool BlendSchedule::same_embeddings(const BlendSchedule& other) const {
    if (n_steps() != other.n_steps()) return false;
    for (std::size_t i = 0; i < n_steps(); ++i)
        for (Block b : kBlocks)
            if (at(i, b) != other.at(i, b)) return false;
    return true;
}

BlendSchedule textual_schedule(const Prompt& p1, const Prompt& p2, double w, std::size_t n_steps) {
    return BlendSchedule::textual(p1, p2, w, n_steps);
}

BlendSchedule switch_schedule(const Prompt& p1, const Prompt& p2, std::size_t switch_step, std::size_t n_steps) {
    return BlendSchedule::switch_at(p1, p2, switch_step, n_steps);
}

BlendSchedule alternate_schedule(const Prompt& p1, const Prompt& p2, std::optional<std::vector<bool>> pattern,
                                 std::size_t n_steps) {
    return BlendSchedule::alternate(p1, p2, std::move(pattern), n_steps);
}

BlendSchedule unet_schedule(const Prompt& p1, const Prompt& p2, UnetVariant variant, std::size_t n_steps) {
    return BlendSchedule::unet(p1, p2, variant, n_steps);
}

} // namespace cblend
