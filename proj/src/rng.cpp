#include "cblend/rng.hpp"

#include <cfloat>
#include <cmath>
#include <numbers>

namespace cblend {
namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t splitmix64(std::uint64_t& x) {
    x += kGolden;
    return mix64(x);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

std::uint64_t hash_label(std::uint64_t seed, std::string_view label) {
    std::uint64_t h = mix64(seed + kGolden);
    h = mix64(h ^ (label.size() + kGolden));
    for (unsigned char c : label) {
        h = mix64(h ^ (c + kGolden));
    }
    return h;
}

} // namespace

RngStream RngStream::derive(std::uint64_t seed, std::string_view label) {
    if (label.empty() || label.size() > kMaxLabelBytes) {
        throw ConfigError("stream label must be 1.." + std::to_string(kMaxLabelBytes) + " bytes, got " +
                          std::to_string(label.size()));
    }
    RngStream s;
    std::uint64_t x = hash_label(seed, label);
    for (auto& word : s.state_) {
        word = splitmix64(x);
        if (word == 0) word = kZeroWordReplacement;
    }
    s.label_ = std::string(label);
    return s;
}

std::uint64_t RngStream::next_u64() {
    auto& s = state_;
    const std::uint64_t result = rotl(s[0] + s[3], 23) + s[0];
    const std::uint64_t t = s[1] << 17;
    s[2] ^= s[0];
    s[3] ^= s[1];
    s[1] ^= s[2];
    s[0] ^= s[3];
    s[2] ^= t;
    s[3] = rotl(s[3], 45);
    ++draws_;
    return result;
}

double RngStream::next_uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::uint64_t RngStream::next_below(std::uint64_t n) {
    if (n == 0) throw ContractError("next_below(0)");
    // Lemire's multiply-shift with rejection; unbiased.
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
        const unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
        if (static_cast<std::uint64_t>(m) >= threshold) {
            return static_cast<std::uint64_t>(m >> 64);
        }
    }
}

std::array<double, 2> box_muller(double u1, double u2) {
    const double r = std::sqrt(-2.0 * std::log(std::max(u1, DBL_MIN)));
    const double theta = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(theta), r * std::sin(theta)};
}

double RngStream::next_gaussian() {
    if (has_cached_) {
        has_cached_ = false;
        return cached_;
    }
    const double u1 = next_uniform();
    const double u2 = next_uniform();
    const auto z = box_muller(u1, u2);
    cached_ = z[1];
    has_cached_ = true;
    return z[0];
}

Tensor gaussian_tensor(RngStream& stream, std::span<const std::size_t> shape) {
    const std::size_t n = element_count(shape);
    if (n == 0) {
        throw ConfigError("gaussian_tensor: zero-sized shape " + shape_string(shape));
    }
    std::vector<float> data(n);
    for (auto& v : data) v = static_cast<float>(stream.next_gaussian());
    return Tensor(Shape(shape.begin(), shape.end()), std::move(data));
}

} // namespace cblend
