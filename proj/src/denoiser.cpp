#include "cblend/denoiser.hpp"

#include <algorithm>
#include <cmath>

namespace cblend {
namespace {

struct FilmLayer {
    const char* name;
    Block block;
};

constexpr std::array<FilmLayer, 5> kFilmLayers{{
    {"enc.0", Block::enc},
    {"enc.1", Block::enc},
    {"mid.0", Block::mid},
    {"dec.0", Block::dec},
    {"dec.1", Block::dec},
}};

// Parameters per film layer, in layout order.
constexpr std::size_t kPerFilm = 6;

std::size_t fan_in(const DenoiserDims& d, std::size_t layer) {
    switch (layer) {
    case 0: return d.input;
    case 3: return 2 * d.hidden;
    default: return d.hidden;
    }
}

} // namespace

std::string_view block_name(Block b) {
    switch (b) {
    case Block::enc: return "enc";
    case Block::mid: return "mid";
    case Block::dec: return "dec";
    }
    return "?";
}

std::vector<double> time_embed(double t, std::size_t width) {
    if (width == 0 || width % 2 != 0) {
        throw ConfigError("time_embed: width must be even and positive, got " + std::to_string(width));
    }
    const std::size_t half = width / 2;
    std::vector<double> out(width);
    for (std::size_t k = 0; k < half; ++k) {
        const double freq = std::pow(10000.0, 2.0 * static_cast<double>(k) / static_cast<double>(width));
        out[k] = std::sin(t / freq);
        out[half + k] = std::cos(t / freq);
    }
    return out;
}

template <class T>
BlockConditioning<T> broadcast_conditioning(std::span<const float> enc, std::span<const float> mid,
                                            std::span<const float> dec, std::size_t batch) {
    auto repeat = [batch](std::span<const float> e) {
        BasicTensor<T> out(Shape{batch, e.size()});
        for (std::size_t r = 0; r < batch; ++r) std::copy(e.begin(), e.end(), out.row(r).begin());
        return out;
    };
    return {repeat(enc), repeat(mid), repeat(dec)};
}

template <class T>
BlockConditionalDenoiser<T>::BlockConditionalDenoiser(DenoiserDims dims, std::vector<std::string> names,
                                                      std::vector<BasicTensor<T>> params)
    : dims_(dims), names_(std::move(names)), params_(std::move(params)) {
    const auto expected = layout(dims_);
    if (names_.size() != expected.size() || params_.size() != expected.size()) {
        throw ShapeError("denoiser: expected " + std::to_string(expected.size()) + " parameter tensors");
    }
    for (std::size_t i = 0; i < expected.size(); ++i) {
        if (names_[i] != expected[i].first || params_[i].shape() != expected[i].second) {
            throw ShapeError("denoiser: parameter " + std::to_string(i) + " is " + names_[i] +
                             shape_string(params_[i].shape()) + ", expected " + expected[i].first +
                             shape_string(expected[i].second));
        }
    }
}

template <class T>
std::vector<std::pair<std::string, Shape>> BlockConditionalDenoiser<T>::layout(const DenoiserDims& d) {
    if (d.input == 0 || d.hidden == 0 || d.embed == 0) {
        throw ConfigError("denoiser: widths must be at least 1");
    }
    if (d.time == 0 || d.time % 2 != 0) {
        throw ConfigError("denoiser: time feature width must be even and positive");
    }
    const std::size_t c = d.embed + d.time;
    std::vector<std::pair<std::string, Shape>> out;
    for (std::size_t l = 0; l < kFilmLayers.size(); ++l) {
        const std::string n = kFilmLayers[l].name;
        out.push_back({n + ".w", {fan_in(d, l), d.hidden}});
        out.push_back({n + ".b", {d.hidden}});
        out.push_back({n + ".scale.w", {c, d.hidden}});
        out.push_back({n + ".scale.b", {d.hidden}});
        out.push_back({n + ".shift.w", {c, d.hidden}});
        out.push_back({n + ".shift.b", {d.hidden}});
    }
    out.push_back({"out.w", {d.hidden, d.input}});
    out.push_back({"out.b", {d.input}});
    return out;
}

template <class T>
BlockConditionalDenoiser<T> BlockConditionalDenoiser<T>::init_params(RngStream& stream, DenoiserDims dims) {
    std::vector<std::string> names;
    std::vector<BasicTensor<T>> params;
    for (auto& [name, shape] : layout(dims)) {
        BasicTensor<T> p(shape);
        const bool affine_weight = name.ends_with(".w") && !name.ends_with("scale.w") && !name.ends_with("shift.w");
        if (affine_weight) {
            const double sd = std::sqrt(2.0 / static_cast<double>(shape[0]));
            for (auto& v : p.data()) v = static_cast<T>(sd * stream.next_gaussian());
        }
        names.push_back(name);
        params.push_back(std::move(p));
    }
    return BlockConditionalDenoiser(dims, std::move(names), std::move(params));
}

template <class T>
std::size_t BlockConditionalDenoiser<T>::index_of(std::string_view name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) throw LookupError("denoiser: no parameter '" + std::string(name) + "'");
    return static_cast<std::size_t>(it - names_.begin());
}

template <class T>
BasicTensor<T>& BlockConditionalDenoiser<T>::param(std::string_view name) {
    return params_[index_of(name)];
}

template <class T>
const BasicTensor<T>& BlockConditionalDenoiser<T>::param(std::string_view name) const {
    return params_[index_of(name)];
}

template <class T>
typename BlockConditionalDenoiser<T>::Id BlockConditionalDenoiser<T>::forward(Tape<T>& tape,
                                                                               std::span<const Id> p, Id x,
                                                                               Id time_features, Id enc, Id mid,
                                                                               Id dec) const {
    if (p.size() != params_.size()) throw ContractError("denoiser forward: parameter id count mismatch");
    const Id cond_enc = tape.apply(Primitive::concat, {enc, time_features});
    const Id cond_mid = tape.apply(Primitive::concat, {mid, time_features});
    const Id cond_dec = tape.apply(Primitive::concat, {dec, time_features});
    auto cond_for = [&](Block b) { return b == Block::enc ? cond_enc : b == Block::mid ? cond_mid : cond_dec; };

    auto film_layer = [&](std::size_t l, Id in) {
        const std::size_t base = l * kPerFilm;
        const Id c = cond_for(kFilmLayers[l].block);
        const Id z = tape.apply(Primitive::add, {tape.apply(Primitive::matmul, {in, p[base]}), p[base + 1]});
        const Id scale = tape.apply(Primitive::add, {tape.apply(Primitive::matmul, {c, p[base + 2]}), p[base + 3]});
        const Id shift = tape.apply(Primitive::add, {tape.apply(Primitive::matmul, {c, p[base + 4]}), p[base + 5]});
        return tape.apply(Primitive::silu, {tape.apply(Primitive::film, {z, scale, shift})});
    };

    const Id h0 = film_layer(0, x);
    const Id skip = film_layer(1, h0);
    const Id m = film_layer(2, skip);
    const Id d0 = film_layer(3, tape.apply(Primitive::concat, {m, skip}));
    const Id d1 = film_layer(4, d0);
    const std::size_t out = kFilmLayers.size() * kPerFilm;
    return tape.apply(Primitive::add, {tape.apply(Primitive::matmul, {d1, p[out]}), p[out + 1]});
}

template <class T>
BasicTensor<T> BlockConditionalDenoiser<T>::time_features(std::span<const int> timesteps) const {
    BasicTensor<T> out(Shape{timesteps.size(), dims_.time});
    for (std::size_t r = 0; r < timesteps.size(); ++r) {
        const auto f = time_embed(static_cast<double>(timesteps[r]), dims_.time);
        std::transform(f.begin(), f.end(), out.row(r).begin(), [](double v) { return static_cast<T>(v); });
    }
    return out;
}

template <class T>
BasicTensor<T> BlockConditionalDenoiser<T>::predict_eps(const BasicTensor<T>& x_t, std::span<const int> timesteps,
                                                        const BlockConditioning<T>& cond) const {
    if (x_t.rank() != 2 || x_t.dim(1) != dims_.input) {
        throw ShapeError("predict_eps: expected [B," + std::to_string(dims_.input) + "], got " +
                         shape_string(x_t.shape()));
    }
    const std::size_t batch = x_t.dim(0);
    if (timesteps.size() != batch) throw ShapeError("predict_eps: one timestep per row required");
    for (Block b : kBlocks) {
        const auto& e = cond[b];
        if (e.rank() != 2 || e.dim(0) != batch || e.dim(1) != dims_.embed) {
            throw ShapeError("predict_eps: " + std::string(block_name(b)) + " conditioning has shape " +
                             shape_string(e.shape()) + ", expected [" + std::to_string(batch) + "," +
                             std::to_string(dims_.embed) + "]");
        }
    }
    Tape<T> tape;
    std::vector<Id> ids;
    ids.reserve(params_.size());
    for (const auto& p : params_) ids.push_back(tape.constant(p));
    const Id x = tape.constant(x_t);
    const Id tf = tape.constant(time_features(timesteps));
    const Id enc = tape.constant(cond.enc);
    const Id mid = tape.constant(cond.mid);
    const Id dec = tape.constant(cond.dec);
    const Id out = forward(tape, ids, x, tf, enc, mid, dec);
    return tape.value(out);
}

template class BlockConditionalDenoiser<float>;
template class BlockConditionalDenoiser<double>;
template BlockConditioning<float> broadcast_conditioning<float>(std::span<const float>, std::span<const float>,
                                                                std::span<const float>, std::size_t);
template BlockConditioning<double> broadcast_conditioning<double>(std::span<const float>, std::span<const float>,
                                                                  std::span<const float>, std::size_t);

} // namespace cblend
