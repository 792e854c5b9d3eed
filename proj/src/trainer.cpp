#include "cblend/trainer.hpp"

#include <cmath>
#include <sstream>

namespace cblend {

void TrainConfig::validate() const {
    if (epochs == 0 || batch_size == 0 || steps_per_epoch == 0) {
        throw ConfigError("train: epochs, batch_size and steps_per_epoch must be at least 1");
    }
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ConfigError("train: learning_rate must be >= 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
        throw ConfigError("train: adam betas must lie in [0,1)");
    }
    if (!(adam_eps > 0.0)) throw ConfigError("train: adam eps must be positive");
    if (!(p_uncond >= 0.0 && p_uncond < 1.0)) throw ConfigError("train: p_uncond must lie in [0,1)");
    if (t_train < 2) throw ConfigError("train: T_train must be at least 2");
    (void)schedule();
}

AdamState AdamState::zeros_like(std::span<const Tensor> params) {
    AdamState s;
    for (const auto& p : params) {
        s.m.emplace_back(p.shape());
        s.v.emplace_back(p.shape());
    }
    return s;
}

void adam_step(std::span<Tensor> params, std::span<const Tensor> grads, AdamState& state, const TrainConfig& config) {
    if (params.size() != grads.size()) throw ShapeError("adam_step: parameter and gradient counts differ");
    if (state.m.empty() && state.v.empty()) {
        auto z = AdamState::zeros_like(params);
        state.m = std::move(z.m);
        state.v = std::move(z.v);
    }
    if (state.m.size() != params.size() || state.v.size() != params.size()) {
        throw ShapeError("adam_step: optimizer state does not match parameters");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i].shape() != grads[i].shape() || state.m[i].shape() != params[i].shape() ||
            state.v[i].shape() != params[i].shape()) {
            throw ShapeError("adam_step: shape mismatch at tensor " + std::to_string(i));
        }
    }
    state.step += 1;
    const double b1 = config.beta1;
    const double b2 = config.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
    const double lr = config.learning_rate;
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto p = params[i].data();
        auto m = state.m[i].data();
        auto v = state.v[i].data();
        const auto g = grads[i].data();
        for (std::size_t j = 0; j < p.size(); ++j) {
            const double gj = g[j];
            const double mj = b1 * m[j] + (1.0 - b1) * gj;
            const double vj = b2 * v[j] + (1.0 - b2) * gj * gj;
            m[j] = static_cast<float>(mj);
            v[j] = static_cast<float>(vj);
            const double update = lr * (mj / c1) / (std::sqrt(vj / c2) + config.adam_eps);
            p[j] = static_cast<float>(static_cast<double>(p[j]) - update);
        }
    }
}

Checkpoint init_checkpoint(const Domain& domain, DenoiserDims dims, const TrainConfig& config) {
    config.validate();
    dims.input = domain_data_dim(domain);
    auto net_stream = RngStream::derive(config.seed, "init-params");
    auto table_stream = RngStream::derive(config.seed, "init-embeddings");
    auto net = BlockConditionalDenoiser<float>::init_params(net_stream, dims);
    auto table = EmbeddingTable::random(ConceptVocab(domain_concepts(domain)), dims.embed, table_stream);
    std::vector<Tensor> all = net.params();
    all.push_back(table.vectors());
    return Checkpoint{domain_kind(domain), std::move(net), std::move(table), AdamState::zeros_like(all), config, {}};
}

namespace {

struct Batch {
    Tensor x_t;
    Tensor eps;
    std::vector<int> timesteps;
    std::vector<std::size_t> rows;  // embedding-table row per datum
};

Batch draw_batch(const Domain& domain, const std::vector<std::string>& concepts, const ConceptVocab& vocab,
                 const NoiseSchedule& schedule, std::size_t batch, double p_uncond, RngStream& stream) {
    const std::size_t dim = domain_data_dim(domain);
    Batch b{Tensor(Shape{batch, dim}), Tensor(Shape{batch, dim}), std::vector<int>(batch),
            std::vector<std::size_t>(batch)};
    for (std::size_t r = 0; r < batch; ++r) {
        const std::string& c = concepts[stream.next_below(concepts.size())];
        const auto x0 = sample_diffusion_datum(domain, c, stream);
        const int t = static_cast<int>(stream.next_below(schedule.t_train()));
        const bool dropped = stream.next_uniform() < p_uncond;
        const double ab = schedule.alpha_bar(t);
        const double sa = std::sqrt(ab);
        const double sn = std::sqrt(1.0 - ab);
        auto xr = b.x_t.row(r);
        auto er = b.eps.row(r);
        for (std::size_t j = 0; j < dim; ++j) {
            const double e = stream.next_gaussian();
            er[j] = static_cast<float>(e);
            xr[j] = static_cast<float>(sa * static_cast<double>(x0[j]) + sn * e);
        }
        b.timesteps[r] = t;
        b.rows[r] = dropped ? vocab.null_row() : vocab.row_of(c);
    }
    return b;
}

std::string diagnostics(std::size_t epoch, double loss, const Checkpoint& ckpt) {
    std::ostringstream os;
    os << "training diverged at epoch " << epoch << ": mean loss " << loss << " (lr " << ckpt.config.learning_rate
       << ", batch " << ckpt.config.batch_size << ", adam step " << ckpt.adam.step << ")";
    return os.str();
}

} // namespace

void train(const Domain& domain, Checkpoint& ckpt, const EpochCallback& on_epoch) {
    const TrainConfig& cfg = ckpt.config;
    cfg.validate();
    if (ckpt.domain_kind != domain_kind(domain)) {
        throw ContractError("train: checkpoint is for domain '" + ckpt.domain_kind + "'");
    }
    const auto concepts = domain_concepts(domain);
    for (const auto& c : concepts) (void)ckpt.table.vocab().row_of(c);
    if (ckpt.net.dims().input != domain_data_dim(domain)) throw ShapeError("train: net input width differs from domain");
    if (ckpt.table.width() != ckpt.net.dims().embed) throw ShapeError("train: table width differs from net embed width");

    const NoiseSchedule schedule = cfg.schedule();
    const std::size_t n_net = ckpt.net.params().size();
    const std::size_t width = ckpt.table.width();
    const std::size_t first_epoch = ckpt.loss_curve.size();

    for (std::size_t e = first_epoch; e < first_epoch + cfg.epochs; ++e) {
        auto stream = RngStream::derive(cfg.seed, "train/" + std::to_string(e));
        double loss_sum = 0.0;
        for (std::size_t s = 0; s < cfg.steps_per_epoch; ++s) {
            const Batch b = draw_batch(domain, concepts, ckpt.table.vocab(), schedule, cfg.batch_size, cfg.p_uncond,
                                       stream);
            Tensor cond(Shape{cfg.batch_size, width});
            for (std::size_t r = 0; r < cfg.batch_size; ++r) {
                const auto src = ckpt.table.vectors().row(b.rows[r]);
                std::copy(src.begin(), src.end(), cond.row(r).begin());
            }

            Tape<float> tape;
            std::vector<Tape<float>::Id> ids;
            ids.reserve(n_net);
            for (const auto& p : ckpt.net.params()) ids.push_back(tape.parameter(p));
            const auto c_id = tape.parameter(std::move(cond));
            const auto x_id = tape.constant(b.x_t);
            const auto tf_id = tape.constant(ckpt.net.time_features(b.timesteps));
            const auto out = ckpt.net.forward(tape, ids, x_id, tf_id, c_id, c_id, c_id);
            const auto target = tape.constant(b.eps);
            const auto loss = tape.apply(Primitive::mse, {out, target});
            const double lv = tape.value(loss).item();
            loss_sum += lv;

            auto grads = tape.backward(loss);
            std::vector<Tensor> g;
            g.reserve(n_net + 1);
            for (auto id : ids) g.push_back(std::move(grads.at(id)));
            Tensor table_grad(ckpt.table.vectors().shape());
            const Tensor& cg = grads.at(c_id);
            for (std::size_t r = 0; r < cfg.batch_size; ++r) {
                auto dst = table_grad.row(b.rows[r]);
                const auto src = cg.row(r);
                for (std::size_t j = 0; j < width; ++j) dst[j] += src[j];
            }
            g.push_back(std::move(table_grad));

            std::vector<Tensor> params = std::move(ckpt.net.params());
            params.push_back(std::move(ckpt.table.vectors()));
            adam_step(params, g, ckpt.adam, cfg);
            ckpt.table.vectors() = std::move(params.back());
            params.pop_back();
            ckpt.net.params() = std::move(params);
        }
        const double mean = loss_sum / static_cast<double>(cfg.steps_per_epoch);
        if (!std::isfinite(mean)) throw NumericError(diagnostics(e, mean, ckpt));
        ckpt.loss_curve.push_back(mean);
        if (on_epoch) on_epoch(e, mean);
    }
}

Checkpoint train_new(const Domain& domain, DenoiserDims dims, const TrainConfig& config,
                     const EpochCallback& on_epoch) {
    Checkpoint ckpt = init_checkpoint(domain, dims, config);
    train(domain, ckpt, on_epoch);
    return ckpt;
}

double loss_eval(const Denoiser& denoiser, const EmbeddingTable& table, const Domain& domain,
                 const NoiseSchedule& schedule, std::size_t n, RngStream& stream) {
    if (n == 0) throw ContractError("loss_eval: n must be at least 1");
    const auto concepts = domain_concepts(domain);
    const std::size_t dim = domain_data_dim(domain);
    if (denoiser.data_dim() != dim) throw ShapeError("loss_eval: denoiser width differs from domain");
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::string& c = concepts[i % concepts.size()];
        const auto e = table.encode(c);
        const auto x0 = sample_diffusion_datum(domain, c, stream);
        const int t[1] = {static_cast<int>(stream.next_below(schedule.t_train()))};
        const double ab = schedule.alpha_bar(t[0]);
        Tensor x(Shape{1, dim});
        Tensor eps(Shape{1, dim});
        for (std::size_t j = 0; j < dim; ++j) {
            const double g = stream.next_gaussian();
            eps[j] = static_cast<float>(g);
            x[j] = static_cast<float>(std::sqrt(ab) * static_cast<double>(x0[j]) + std::sqrt(1.0 - ab) * g);
        }
        const Tensor pred = denoiser.predict_eps(x, t, e, e, e);
        total += apply_primitive<float>(Primitive::mse, {&pred, &eps}).item();
    }
    return total / static_cast<double>(n);
}

NetDenoiser checkpoint_denoiser(const Checkpoint& ckpt) { return NetDenoiser(ckpt.net, ckpt.table.null_embedding()); }

} // namespace cblend
