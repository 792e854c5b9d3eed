#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cblend/concept_space.hpp"
#include "cblend/denoiser.hpp"

namespace cblend {

enum class BlendMethod { single, textual, switch_at, alternate, unet };

/// Which prompt conditions which block under the UNET method.
enum class UnetVariant {
    enc2_dec1,  // enc: p2, mid: p1, dec: p1
    enc1_dec2,  // enc: p1, mid: p1, dec: p2
};

std::string_view method_name(BlendMethod m);
BlendMethod parse_method(std::string_view name);
std::string_view variant_name(UnetVariant v);
UnetVariant parse_variant(std::string_view name);

/// Serializable description of a schedule; everything except the embedding values.
struct BlendSpec {
    BlendMethod method = BlendMethod::single;
    std::string p1;
    std::string p2;  // empty for single
    double weight = 0.5;
    std::size_t switch_step = 0;
    std::vector<bool> pattern;  // alternate: true -> p1 at that step
    UnetVariant variant = UnetVariant::enc2_dec1;
    std::size_t n_steps = 25;

    bool operator==(const BlendSpec&) const = default;
};

/// A concept id with its embedding.
struct Prompt {
    std::string id;
    ConceptEmbedding embedding;
};

/// Evenly spread pattern with exactly k of n entries true: step i is true when floor((i+1)k/n) > floor(ik/n).
std::vector<bool> ratio_pattern(std::size_t k, std::size_t n);

/// Even steps true, odd steps false.
std::vector<bool> parity_pattern(std::size_t n);

/**
 * Total map (inference step, block) -> conditioning embedding.
 *
 * Steps index the inference loop (step 0 is the noisiest grid point), not
 * training timesteps. Each constructor realizes one blending method.
 */
class BlendSchedule {
public:
    static BlendSchedule single(const Prompt& p, std::size_t n_steps);

    /// Constant blend_embeddings(e1, e2, w) at every step and block. w in [0,1].
    static BlendSchedule textual(const Prompt& p1, const Prompt& p2, double w, std::size_t n_steps);

    /// p1 for steps < switch_step, p2 afterwards. switch_step in [0, n_steps].
    static BlendSchedule switch_at(const Prompt& p1, const Prompt& p2, std::size_t switch_step, std::size_t n_steps);

    /// p1 where pattern[i] is true, p2 elsewhere; default pattern is even/odd parity.
    static BlendSchedule alternate(const Prompt& p1, const Prompt& p2, std::optional<std::vector<bool>> pattern,
                                   std::size_t n_steps);

    /// Constant per-block assignment chosen by the variant.
    static BlendSchedule unet(const Prompt& p1, const Prompt& p2, UnetVariant variant, std::size_t n_steps);

    /// Builds the schedule a spec describes, encoding prompts from `table`.
    static BlendSchedule from_spec(const BlendSpec& spec, const EmbeddingTable& table);

    /// Throws ContractError outside [0, n_steps).
    const ConceptEmbedding& at(std::size_t step, Block block) const;

    const BlendSpec& spec() const noexcept { return spec_; }
    std::size_t n_steps() const noexcept { return spec_.n_steps; }

    /// True when two schedules yield bitwise-equal embeddings everywhere.
    bool same_embeddings(const BlendSchedule& other) const;

private:
    BlendSchedule(BlendSpec spec, std::vector<ConceptEmbedding> pool) : spec_(std::move(spec)), pool_(std::move(pool)) {}

    void fill(std::size_t step, std::uint8_t enc, std::uint8_t mid, std::uint8_t dec);

    BlendSpec spec_;
    std::vector<ConceptEmbedding> pool_;
    std::vector<std::array<std::uint8_t, 3>> steps_;
};

BlendSchedule textual_schedule(const Prompt& p1, const Prompt& p2, double w, std::size_t n_steps = 25);
BlendSchedule switch_schedule(const Prompt& p1, const Prompt& p2, std::size_t switch_step, std::size_t n_steps = 25);
BlendSchedule alternate_schedule(const Prompt& p1, const Prompt& p2, std::optional<std::vector<bool>> pattern,
                                 std::size_t n_steps = 25);
BlendSchedule unet_schedule(const Prompt& p1, const Prompt& p2, UnetVariant variant = UnetVariant::enc2_dec1,
                            std::size_t n_steps = 25);

} // namespace cblend
