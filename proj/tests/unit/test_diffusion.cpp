#include <doctest.h>

#include <cmath>

#include "cblend/error.hpp"
#include "helpers.hpp"

using namespace cblend;
using namespace cblend::testing;

TEST_SUITE("diffusion") {
TEST_CASE("linear schedule cumulative product") {
    const auto s = linear_schedule(1000, 1e-4, 0.02);
    long double ab = 1.0L;
    for (int t = 0; t < 1000; ++t) ab *= 1.0L - (1e-4L + (0.02L - 1e-4L) * t / 999.0L);
    CHECK(std::abs(s.alpha_bar(999) - static_cast<double>(ab)) <= 1e-7 * static_cast<double>(ab));
    CHECK(s.alpha_bar(999) == doctest::Approx(4.04e-5).epsilon(0.005));
    CHECK(s.betas.front() == 1e-4);
    CHECK(s.betas.back() == 0.02);
}

TEST_CASE("single-step schedule uses beta_min") {
    const auto s = linear_schedule(1, 1e-4, 0.02);
    REQUIRE(s.t_train() == 1);
    CHECK(s.betas[0] == 1e-4);
}

TEST_CASE("schedule bounds are configuration errors") {
    CHECK_THROWS_AS(linear_schedule(0, 1e-4, 0.02), ConfigError);
    CHECK_THROWS_AS(linear_schedule(10, 0.0, 0.02), ConfigError);
    CHECK_THROWS_AS(linear_schedule(10, 0.03, 0.02), ConfigError);
    CHECK_THROWS_AS(linear_schedule(10, 1e-4, 1.0), ConfigError);
}

TEST_CASE("timestep grids") {
    const auto g25 = timestep_grid(1000, 25);
    CHECK(g25.size() == 25);
    CHECK(g25.front() == 999);
    CHECK(g25.back() == 0);
    CHECK(timestep_grid(1000, 3) == std::vector<int>{999, 500, 0});
    const auto full = timestep_grid(1000, 1000);
    for (int i = 0; i < 1000; ++i) CHECK(full[static_cast<std::size_t>(i)] == 999 - i);
    CHECK_THROWS_AS(timestep_grid(1000, 1), ConfigError);
    CHECK_THROWS_AS(timestep_grid(10, 11), ConfigError);
}

TEST_CASE("forward diffusion near t = 0 stays close to x0") {
    const auto s = linear_schedule(1000, 1e-4, 0.02);
    auto r = RngStream::derive(1, "fwd");
    const Tensor x0(Shape{1, 2}, {1.0f, -3.0f});
    const auto [xt, eps] = forward_diffuse(x0, 0, s, r);
    const double sd = std::sqrt(1 - s.alpha_bar(0));
    for (int k = 0; k < 2; ++k) {
        CHECK(std::abs(xt.data()[k] - x0.data()[k]) <=
              sd * std::abs(eps.data()[k]) + (1 - std::sqrt(s.alpha_bar(0))) * 3 + 1e-6);
    }
}

TEST_CASE("guidance combination") {
    const Tensor u(Shape{1, 3}, {0.1f, -2.0f, 3.3f});
    const Tensor c(Shape{1, 3}, {1.7f, 0.4f, -0.9f});
    CHECK(cfg_combine(u, c, 1.0) == c);
    CHECK(cfg_combine(u, c, 0.0) == u);
    CHECK(cfg_combine(Tensor::scalar(0.0f), Tensor::scalar(1.0f), 7.5).item() == 7.5f);
    CHECK_THROWS_AS(cfg_combine(u, Tensor(Shape{1, 2}, 0.0f), 2.0), ShapeError);
}

TEST_CASE("reverse step requires t_prev < t") {
    const auto s = linear_schedule(1000, 1e-4, 0.02);
    const Tensor x(Shape{1, 2}, 0.0f);
    std::vector<RngStream> streams{RngStream::derive(1, "r")};
    CHECK_THROWS_AS(reverse_step(x, x, 10, 10, s, SamplerConfig::gmm_defaults(), streams), ContractError);
    CHECK_THROWS_AS(reverse_step(x, x, 10, 20, s, SamplerConfig::gmm_defaults(), streams), ContractError);
}

TEST_CASE("final step returns the clamped x0 estimate") {
    const auto s = linear_schedule(1000, 1e-4, 0.02);
    const Tensor x(Shape{1, 2}, {50.0f, 0.5f});
    const Tensor eps(Shape{1, 2}, 0.0f);
    std::vector<RngStream> streams{RngStream::derive(1, "r")};
    const Tensor out = reverse_step(x, eps, 0, kFinalStep, s, SamplerConfig::gmm_defaults(), streams);
    CHECK(out.data()[0] == 10.0f);
    CHECK(out.data()[1] == doctest::Approx(0.5 / std::sqrt(s.alpha_bar(0))));
}

TEST_CASE("ddim with eta 0 consumes no noise") {
    const auto s = linear_schedule(1000, 1e-4, 0.02);
    const Tensor x(Shape{1, 2}, {0.3f, 0.5f});
    std::vector<RngStream> streams{RngStream::derive(1, "r")};
    const auto before = streams[0];
    reverse_step(x, x, 500, 400, s, SamplerConfig::gmm_defaults(), streams);
    CHECK(streams[0] == before);
    SamplerConfig ddpm = SamplerConfig::gmm_defaults();
    ddpm.kind = SamplerKind::ddpm;
    reverse_step(x, x, 500, 400, s, ddpm, streams);
    CHECK(streams[0].draws() == before.draws() + 2);
}

TEST_CASE("generation replays byte-identically") {
    const auto w = GmmDomain::default_world();
    const auto s = linear_schedule(1000, 1e-4, 0.02);
    const GmmOracleDenoiser oracle(w, s);
    const auto table = oracle_embeddings(w);
    const auto blend = BlendSchedule::from_spec(spec(BlendMethod::single, "A"), table);
    for (auto kind : {SamplerKind::ddim, SamplerKind::ddpm}) {
        SamplerConfig c = SamplerConfig::gmm_defaults();
        c.kind = kind;
        CHECK(generate(oracle, blend, s, c, 42, 3) == generate(oracle, blend, s, c, 42, 3));
        CHECK(generate(oracle, blend, s, c, 42, 3) != generate(oracle, blend, s, c, 42, 4));
    }
}

TEST_CASE("batch rows equal single generations") {
    const auto s = linear_schedule(1000, 1e-4, 0.02);
    const auto net = random_net(1, small_dims());
    const auto table = random_table(1, {"A", "B"}, 8);
    const auto blend = BlendSchedule::from_spec(spec(BlendMethod::alternate, "A", "B"), table);
    SamplerConfig c = SamplerConfig::gmm_defaults();
    c.kind = SamplerKind::ddpm;
    c.guidance_scale = 3.0;
    const std::vector<std::size_t> ids{5, 0, 9};
    const Tensor batch = generate_batch(net, blend, s, c, 7, ids);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const Tensor one = generate(net, blend, s, c, 7, ids[i]);
        for (std::size_t k = 0; k < 2; ++k) CHECK(one.data()[k] == batch.at(i, k));
    }
}

TEST_CASE("oracle samples of A land nearest to A") {
    const auto w = GmmDomain::default_world();
    const auto s = linear_schedule(1000, 1e-4, 0.02);
    const GmmOracleDenoiser oracle(w, s);
    const auto blend = BlendSchedule::from_spec(spec(BlendMethod::single, "A"), oracle_embeddings(w));
    std::vector<std::size_t> ids(1000);
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
    const Tensor x = generate_batch(oracle, blend, s, SamplerConfig::gmm_defaults(), 0, ids);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const Vec2 p{x.at(i, 0), x.at(i, 1)};
        hits += w.concept_distance("A", p) < std::min(w.concept_distance("B", p), w.concept_distance("C", p));
    }
    CHECK(hits >= 990);
}

TEST_CASE("blend step count must match the sampler") {
    const auto w = GmmDomain::default_world();
    const auto s = linear_schedule(1000, 1e-4, 0.02);
    const GmmOracleDenoiser oracle(w, s);
    auto sp = spec(BlendMethod::single, "A");
    sp.n_steps = 10;
    const auto blend = BlendSchedule::from_spec(sp, oracle_embeddings(w));
    CHECK_THROWS_AS(generate(oracle, blend, s, SamplerConfig::gmm_defaults(), 0, 0), ContractError);
}

TEST_CASE("sampler config validation") {
    SamplerConfig c = SamplerConfig::gmm_defaults();
    CHECK_NOTHROW(c.validate(1000));
    c.n_steps = 1;
    CHECK_THROWS_AS(c.validate(1000), ConfigError);
    c = SamplerConfig::gmm_defaults();
    c.clip_min = 1;
    c.clip_max = -1;
    CHECK_THROWS_AS(c.validate(1000), ConfigError);
    CHECK(parse_sampler("ddpm") == SamplerKind::ddpm);
    CHECK_THROWS_AS(parse_sampler("euler"), ConfigError);
}
}
