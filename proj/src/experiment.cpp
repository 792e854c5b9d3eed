#include "cblend/experiment.hpp"

#include <openssl/evp.h>

#include <json.hpp>
#include <memory>
#include <numeric>

#include "cblend/evaluation.hpp"
#include "cblend/output.hpp"
#include "cblend/ranking.hpp"
#include "cblend/trainer.hpp"

namespace cblend {

using ojson = nlohmann::ordered_json;

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
        throw IoError("sha256: digest failed");
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += kHex[md[i] >> 4];
        out += kHex[md[i] & 15];
    }
    return out;
}

std::string sha256_hex(std::string_view text) {
    return sha256_hex(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

Domain make_domain(std::string_view kind) {
    if (kind == "gmm") return GmmDomain::default_world();
    if (kind == "glyph") return GlyphDomain();
    throw ConfigError("unknown domain '" + std::string(kind) + "'");
}

std::string blend_spec_json(const BlendSpec& s) {
    ojson j;
    j["method"] = method_name(s.method);
    j["p1"] = s.p1;
    if (s.method != BlendMethod::single) j["p2"] = s.p2;
    j["n_steps"] = s.n_steps;
    switch (s.method) {
    case BlendMethod::textual: j["weight"] = s.weight; break;
    case BlendMethod::switch_at: j["switch_step"] = s.switch_step; break;
    case BlendMethod::alternate: {
        std::string p;
        for (bool b : s.pattern) p += b ? '1' : '2';
        j["pattern"] = p;
        break;
    }
    case BlendMethod::unet: j["variant"] = variant_name(s.variant); break;
    default: break;
    }
    return j.dump();
}

std::string RunManifest::to_json() const {
    ojson j;
    j["tool_version"] = tool_version;
    j["config_sha256"] = config_sha256;
    j["seeds"] = seeds;
    j["domain"] = domain;
    j["sampler"] = ojson::parse(sampler);
    j["checkpoint"] = checkpoint;
    j["rng_labels"] = {"init-latent/{sample_id}", "ddpm-noise/{sample_id}", "train/{epoch}"};
    ojson jobs_json = ojson::array();
    for (const auto& job : jobs) {
        ojson jj;
        jj["name"] = job.name;
        jj["type"] = job.type;
        if (!job.schedule.empty()) jj["schedule"] = ojson::parse(job.schedule);
        ojson outs = ojson::array();
        for (const auto& o : job.outputs) outs.push_back({{"path", o.path}, {"sha256", o.sha256}, {"bytes", o.bytes}});
        jj["outputs"] = outs;
        jobs_json.push_back(jj);
    }
    j["jobs"] = jobs_json;
    if (comparison) {
        j["comparison"] = {{"path", comparison->path}, {"sha256", comparison->sha256}, {"bytes", comparison->bytes}};
    }
    return j.dump(2) + "\n";
}

namespace {

std::string sampler_json(const SamplerConfig& s, const ExperimentConfig& cfg) {
    ojson j;
    j["kind"] = sampler_name(s.kind);
    j["n_steps"] = s.n_steps;
    j["eta"] = s.eta;
    j["guidance"] = s.guidance_scale;
    j["clip"] = {s.clip_min, s.clip_max};
    j["t_train"] = cfg.t_train;
    j["beta_min"] = cfg.beta_min;
    j["beta_max"] = cfg.beta_max;
    return j.dump();
}

struct Model {
    std::unique_ptr<Denoiser> denoiser;
    std::unique_ptr<EmbeddingTable> table;
    std::string id;
};

class Runner {
public:
    Runner(const ExperimentConfig& cfg, const std::filesystem::path& out, const LogFn& log)
        : cfg_(cfg), out_(out), log_(log), domain_(make_domain(cfg.domain)), schedule_(cfg.schedule()) {}

    RunManifest run(std::string_view config_text) {
        RunManifest m;
        m.tool_version = kToolVersion;
        m.config_sha256 = sha256_hex(config_text);
        m.seeds = cfg_.seeds;
        m.domain = cfg_.domain;
        m.sampler = sampler_json(cfg_.sampler, cfg_);
        load_initial_model();
        for (const auto& job : cfg_.jobs) {
            say("job " + job.name + " (" + std::string(job_type_name(job.type)) + ")");
            JobRecord rec{job.name, std::string(job_type_name(job.type)), {}, {}};
            switch (job.type) {
            case JobType::train: train_job(job, rec); break;
            case JobType::sample: sample_job(job, rec); break;
            case JobType::blend: blend_job(job, rec); break;
            case JobType::sweep: sweep_job(job, rec); break;
            case JobType::eval: eval_job(job, rec); break;
            case JobType::rank: rank_job(job, rec); break;
            }
            m.jobs.push_back(std::move(rec));
        }
        m.checkpoint = model_.id;
        if (blend_profiles_.size() >= 2) {
            // Side-by-side comparison of every blend job in the run.
            CsvTable t = profiles_csv(blend_profiles_);
            t.header.insert(t.header.begin(), "job");
            for (std::size_t i = 0; i < t.rows.size(); ++i) t.rows[i].insert(t.rows[i].begin(), blend_names_[i]);
            const std::string text = t.to_string();
            write_text_file(out_ / "comparison.csv", text);
            m.comparison = OutputRecord{"comparison.csv", sha256_hex(text), text.size()};
        }
        write_text_file(out_ / "manifest.json", m.to_json());
        return m;
    }

private:
    void say(const std::string& s) const {
        if (log_) log_(s);
    }

    void load_initial_model() {
        if (cfg_.checkpoint) {
            const auto bytes = read_file_bytes(*cfg_.checkpoint);
            use_checkpoint(deserialize_checkpoint(bytes), sha256_hex(bytes));
        } else if (const auto* g = std::get_if<GmmDomain>(&domain_)) {
            model_.denoiser = std::make_unique<GmmOracleDenoiser>(*g, schedule_);
            model_.table = std::make_unique<EmbeddingTable>(oracle_embeddings(*g));
            model_.id = "oracle";
        } else {
            model_.id = "none";
        }
    }

    void use_checkpoint(const Checkpoint& ck, std::string id) {
        if (ck.domain_kind != cfg_.domain) {
            throw ConfigError("checkpoint was trained on domain '" + ck.domain_kind + "', config uses '" +
                              cfg_.domain + "'");
        }
        const auto& tc = ck.config;
        if (tc.t_train != cfg_.t_train || tc.beta_min != cfg_.beta_min || tc.beta_max != cfg_.beta_max) {
            throw ConfigError("checkpoint noise schedule differs from [schedule]");
        }
        model_.denoiser = std::make_unique<NetDenoiser>(checkpoint_denoiser(ck));
        model_.table = std::make_unique<EmbeddingTable>(ck.table);
        model_.id = std::move(id);
    }

    EvalContext context(const std::string& job) const {
        if (!model_.denoiser) {
            throw ConfigError("job " + job + ": the glyph domain needs [model] checkpoint or an earlier train job");
        }
        return EvalContext{*model_.denoiser, *model_.table, domain_, schedule_, cfg_.sampler};
    }

    void emit(JobRecord& rec, const std::string& file, std::span<const std::uint8_t> bytes) {
        const std::filesystem::path rel = std::filesystem::path(rec.name) / file;
        write_file_bytes(out_ / rel, bytes);
        rec.outputs.push_back({rel.generic_string(), sha256_hex(bytes), bytes.size()});
    }

    void emit_text(JobRecord& rec, const std::string& file, std::string_view text) {
        emit(rec, file, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
    }

    static bool wants(const JobConfig& job, std::string_view kind) {
        return std::find(job.outputs.begin(), job.outputs.end(), kind) != job.outputs.end();
    }

    std::vector<std::string> job_concepts(const JobConfig& job) const {
        if (!job.concepts.empty()) return job.concepts;
        if (!job.spec.p1.empty()) return {job.spec.p1};
        return domain_concepts(domain_);
    }

    void train_job(const JobConfig&, JobRecord& rec) {
        DenoiserDims dims = cfg_.dims;
        dims.input = domain_data_dim(domain_);
        Checkpoint ck = train_new(domain_, dims, cfg_.train, [&](std::size_t e, double loss) {
            say("  epoch " + std::to_string(e) + " loss " + format_number(loss));
        });
        const auto bytes = serialize_checkpoint(ck);
        emit(rec, "model.ckpt", bytes);
        CsvTable curve;
        curve.header = {"epoch", "mean_loss"};
        for (std::size_t e = 0; e < ck.loss_curve.size(); ++e) {
            curve.rows.push_back({std::to_string(e), format_number(ck.loss_curve[e])});
        }
        emit_text(rec, "loss_curve.csv", curve.to_string());
        use_checkpoint(ck, sha256_hex(bytes));
    }

    void scatter_or_strip(const JobConfig& job, JobRecord& rec, const BlendProfile& prof, const std::string& stem) {
        if (std::holds_alternative<GmmDomain>(domain_) && wants(job, "svg")) {
            std::vector<ScatterPoint> pts;
            for (std::size_t r = 0; r < prof.records.size(); ++r) {
                pts.push_back({prof.samples.at(r, 0), prof.samples.at(r, 1), prof.records[r].nearest});
            }
            const auto legend = domain_concepts(domain_);
            emit_text(rec, stem + ".svg", encode_svg(pts, legend, stem));
        }
        if (std::holds_alternative<GlyphDomain>(domain_) && wants(job, "ppm")) {
            std::vector<Tensor> imgs;
            for (std::size_t r = 0; r < std::min<std::size_t>(16, prof.records.size()); ++r) {
                const auto row = prof.samples.row(r);
                imgs.emplace_back(Shape{GlyphDomain::kPixels}, std::vector<float>(row.begin(), row.end()));
            }
            emit(rec, stem + ".ppm", encode_ppm_strip(imgs, GlyphDomain::kSide));
        }
    }

    void sample_job(const JobConfig& job, JobRecord& rec) {
        const EvalContext ctx = context(job.name);
        CsvTable t;
        const bool gmm = std::holds_alternative<GmmDomain>(domain_);
        t.header = {"concept", "seed", "sample_id", "nearest", "margin"};
        if (gmm) {
            t.header.push_back("x");
            t.header.push_back("y");
        }
        ojson meta = ojson::array();
        for (const auto& c : job_concepts(job)) {
            BlendSpec spec;
            spec.method = BlendMethod::single;
            spec.p1 = c;
            spec.n_steps = cfg_.sampler.n_steps;
            meta.push_back(ojson::parse(blend_spec_json(spec)));
            const BlendProfile prof = blend_profile(ctx, spec, job.n_samples, cfg_.seeds);
            for (std::size_t r = 0; r < prof.records.size(); ++r) {
                const auto& s = prof.records[r];
                std::vector<std::string> line{c, std::to_string(s.seed), std::to_string(s.sample_id), s.nearest,
                                              format_number(s.margin)};
                if (gmm) {
                    line.push_back(format_number(prof.samples.at(r, 0)));
                    line.push_back(format_number(prof.samples.at(r, 1)));
                }
                t.rows.push_back(std::move(line));
            }
            scatter_or_strip(job, rec, prof, "samples_" + c);
        }
        rec.schedule = meta.dump();
        if (wants(job, "csv")) emit_text(rec, "samples.csv", t.to_string());
    }

    void blend_job(const JobConfig& job, JobRecord& rec) {
        const EvalContext ctx = context(job.name);
        rec.schedule = blend_spec_json(job.spec);
        const BlendProfile prof = blend_profile(ctx, job.spec, job.n_samples, cfg_.seeds);
        if (wants(job, "csv")) emit_text(rec, "profile.csv", prof.records_csv().to_string());
        scatter_or_strip(job, rec, prof, "blend");
        blend_names_.push_back(job.name);
        blend_profiles_.push_back(prof);
        say("  fraction nearest " + job.spec.p1 + ": " + format_number(prof.fraction_nearest_p1));
    }

    void sweep_job(const JobConfig& job, JobRecord& rec) {
        const EvalContext ctx = context(job.name);
        ojson meta;
        meta["method"] = method_name(job.spec.method);
        meta["p1"] = job.spec.p1;
        meta["p2"] = job.spec.p2;
        meta["n_steps"] = cfg_.sampler.n_steps;
        meta["grid"] = job.grid;
        rec.schedule = meta.dump();
        const SweepResult res =
            sweep(ctx, job.spec.method, job.grid, job.spec.p1, job.spec.p2, job.n_samples, cfg_.seeds);
        emit_text(rec, "sweep.csv", res.table().to_string());
    }

    void eval_job(const JobConfig& job, JobRecord& rec) {
        const EvalContext ctx = context(job.name);
        CsvTable t;
        t.header = {"metric", "concept", "value"};
        auto stream = RngStream::derive(cfg_.seeds.front(), "eval-loss");
        const double loss = loss_eval(ctx.denoiser, ctx.table, domain_, schedule_, job.n_samples, stream);
        t.rows.push_back({"eps_mse", "", format_number(loss)});
        for (const auto& c : job_concepts(job)) {
            BlendSpec spec;
            spec.method = BlendMethod::single;
            spec.p1 = c;
            spec.n_steps = cfg_.sampler.n_steps;
            const BlendProfile prof = blend_profile(ctx, spec, job.n_samples, cfg_.seeds);
            t.rows.push_back({"accuracy", c, format_number(prof.fraction_nearest_p1)});
            t.rows.push_back({"affinity", c, format_number(prof.mean_affinity1)});
        }
        emit_text(rec, "eval.csv", t.to_string());
    }

    void rank_job(const JobConfig& job, JobRecord& rec) {
        const auto text = read_file_bytes(job.ballots);
        const RankBallots rb = parse_ballots_csv(parse_csv(std::string_view(
            reinterpret_cast<const char*>(text.data()), text.size())));
        const auto ranks = aggregate_rankings(rb);
        CsvTable t;
        t.header = {"item", "mean", "mode", "count"};
        for (const auto& r : ranks) {
            t.rows.push_back({r.item, format_number(r.mean), std::to_string(r.mode), std::to_string(r.count)});
        }
        emit_text(rec, "rankings.csv", t.to_string());
        const bool table_items = std::all_of(kTableMethods.begin(), kTableMethods.end(), [&](const std::string& m) {
            return std::find(rb.items.begin(), rb.items.end(), m) != rb.items.end();
        });
        if (table_items) {
            const std::string pair = job.spec.p1.empty() ? job.name : job.spec.p1 + "-" + job.spec.p2;
            emit_text(rec, "table.csv", rank_table_csv({RankTableRow{job.category, pair, ranks}}).to_string());
        }
    }

    const ExperimentConfig& cfg_;
    std::filesystem::path out_;
    LogFn log_;
    Domain domain_;
    NoiseSchedule schedule_;
    Model model_;
    std::vector<std::string> blend_names_;
    std::vector<BlendProfile> blend_profiles_;
};

} // namespace

RunManifest run_experiment(const ExperimentConfig& config, std::string_view config_text,
                           const std::filesystem::path& out_dir, const LogFn& log) {
    return Runner(config, out_dir, log).run(config_text);
}

RunManifest run_experiment_file(const std::filesystem::path& config_path, const std::filesystem::path& out_dir,
                                const LogFn& log) {
    const auto bytes = read_file_bytes(config_path);
    const std::string text(bytes.begin(), bytes.end());
    return run_experiment(parse_experiment_config(text), text, out_dir, log);
}

} // namespace cblend
