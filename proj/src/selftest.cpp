#include "cblend/selftest.hpp"

#include <cmath>
#include <functional>

#include "cblend/evaluation.hpp"
#include "cblend/trainer.hpp"

namespace cblend {
namespace {

SelftestResult check(std::string name, const std::function<std::string()>& body) {
    try {
        std::string detail = body();
        return {std::move(name), detail.empty(), detail.empty() ? "ok" : detail};
    } catch (const std::exception& e) {
        return {std::move(name), false, std::string("exception: ") + e.what()};
    }
}

BlendSpec single_spec(const std::string& c) {
    BlendSpec s;
    s.p1 = c;
    return s;
}

} // namespace

std::vector<SelftestResult> run_selftests() {
    const GmmDomain world = GmmDomain::default_world();
    const Domain domain(world);
    const NoiseSchedule schedule = linear_schedule(1000, 1e-4, 0.02);
    const GmmOracleDenoiser oracle(world, schedule);
    const EmbeddingTable table = oracle_embeddings(world);
    const SamplerConfig sampler = SamplerConfig::gmm_defaults();
    std::vector<SelftestResult> out;

    out.push_back(check("rng streams replay", [] {
        auto a = RngStream::derive(7, "x");
        auto b = RngStream::derive(7, "x");
        auto c = RngStream::derive(7, "y");
        for (int i = 0; i < 64; ++i) {
            const auto va = a.next_u64();
            if (va != b.next_u64()) return std::string("same label diverged");
            if (va == c.next_u64()) return std::string("distinct labels collided");
        }
        return std::string();
    }));

    out.push_back(check("oracle eps matches closed form", [&] {
        const auto concepts = world.concepts();
        double worst = 0.0;
        for (int t : {0, 250, 500, 999}) {
            for (const auto& c : concepts) {
                const Vec2 x{1.5, -2.0};
                const Vec2 ref = analytic_eps(world, c, x, schedule.alpha_bar(t));
                const auto e = table.encode(c);
                const Tensor xt(Shape{1, 2}, std::vector<float>{1.5f, -2.0f});
                const int ts[] = {t};
                const Tensor eps = oracle.predict_eps(xt, ts, e, e, e);
                for (int k = 0; k < 2; ++k) worst = std::max(worst, std::abs(eps.at(0, k) - ref[k]));
            }
        }
        return worst <= 1e-4 ? std::string() : "max deviation " + format_number(worst);
    }));

    out.push_back(check("batched generation equals single", [&] {
        const auto blend = BlendSchedule::from_spec(single_spec(world.concepts().front()), table);
        const std::size_t ids[] = {0, 1, 2};
        const Tensor batch = generate_batch(oracle, blend, schedule, sampler, 3, ids);
        for (std::size_t i = 0; i < 3; ++i) {
            const Tensor one = generate(oracle, blend, schedule, sampler, 3, ids[i]);
            for (std::size_t k = 0; k < 2; ++k) {
                if (one.data()[k] != batch.at(i, k)) return std::string("row ") + std::to_string(i) + " differs";
            }
        }
        return std::string();
    }));

    out.push_back(check("oracle samples land on their concept", [&] {
        const EvalContext ctx{oracle, table, domain, schedule, sampler};
        const std::uint64_t seeds[] = {0};
        for (const auto& c : world.concepts()) {
            const auto prof = blend_profile(ctx, single_spec(c), 40, seeds);
            if (prof.fraction_nearest_p1 < 0.9) return c + " accuracy " + format_number(prof.fraction_nearest_p1);
        }
        return std::string();
    }));

    out.push_back(check("checkpoint round trip", [&] {
        TrainConfig tc;
        DenoiserDims dims;
        dims.hidden = 8;
        const Checkpoint ck = init_checkpoint(domain, dims, tc);
        const auto bytes = serialize_checkpoint(ck);
        if (serialize_checkpoint(deserialize_checkpoint(bytes)) != bytes) return std::string("bytes changed");
        auto bad = bytes;
        bad[bad.size() / 2] ^= 1;
        try {
            deserialize_checkpoint(bad);
        } catch (const FormatError&) {
            return std::string();
        }
        return std::string("corruption not detected");
    }));

    return out;
}

} // namespace cblend
