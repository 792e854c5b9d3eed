// Command-line front end: every subcommand becomes a one-job experiment.
#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "cblend/error.hpp"
#include "cblend/experiment.hpp"
#include "cblend/selftest.hpp"

namespace {

using namespace cblend;

struct Options {
    std::optional<std::uint64_t> seed;
    std::string config_path;
    std::string out_dir = "out";
    std::string domain;
    std::string checkpoint;
    std::string sampler;
    std::optional<std::size_t> n_steps;
    std::optional<double> guidance;
    std::size_t n_samples = 100;

    // train
    std::optional<std::size_t> epochs, steps_per_epoch, batch_size, hidden;
    std::optional<double> learning_rate;

    // blend, sweep, sample, eval
    std::string method;
    std::vector<std::string> pair;
    std::vector<std::string> concepts;
    std::optional<double> weight;
    std::optional<std::size_t> switch_step, ratio;
    std::string pattern, variant, grid;

    // rank
    std::string ballots, category;
};

std::string read_text(const std::string& path) {
    const auto bytes = read_file_bytes(path);
    return std::string(bytes.begin(), bytes.end());
}

/// Base settings from --config (its jobs are dropped) plus command-line overrides.
std::pair<ExperimentConfig, std::string> base_config(const Options& o) {
    std::string text;
    if (!o.config_path.empty()) text = read_text(o.config_path);
    std::string overrides;
    if (!o.domain.empty()) overrides += "[domain]\nkind = " + o.domain + "\n";
    ExperimentConfig cfg;
    if (text.empty() && overrides.empty()) {
        cfg = parse_experiment_config("");
    } else if (text.empty()) {
        cfg = parse_experiment_config(overrides);
    } else {
        cfg = parse_experiment_config(text);
        if (!o.domain.empty() && o.domain != cfg.domain) {
            throw ConfigError("--domain " + o.domain + " conflicts with the config file domain " + cfg.domain);
        }
    }
    cfg.jobs.clear();
    if (o.seed) cfg.seeds = {*o.seed};
    if (!o.checkpoint.empty()) cfg.checkpoint = o.checkpoint;
    if (!o.sampler.empty()) cfg.sampler.kind = parse_sampler(o.sampler);
    if (o.n_steps) cfg.sampler.n_steps = *o.n_steps;
    if (o.guidance) cfg.sampler.guidance_scale = *o.guidance;
    if (o.hidden) cfg.dims.hidden = *o.hidden;
    auto& t = cfg.train;
    if (o.epochs) t.epochs = *o.epochs;
    if (o.steps_per_epoch) t.steps_per_epoch = *o.steps_per_epoch;
    if (o.batch_size) t.batch_size = *o.batch_size;
    if (o.learning_rate) t.learning_rate = *o.learning_rate;
    if (o.seed) t.seed = *o.seed;
    t.validate();
    cfg.sampler.validate(cfg.t_train);
    return {std::move(cfg), text};
}

JobConfig make_job(const Options& o, JobType type, const ExperimentConfig& cfg) {
    JobConfig job;
    job.name = std::string(job_type_name(type));
    job.type = type;
    job.n_samples = o.n_samples;
    job.concepts = o.concepts;
    job.ballots = o.ballots;
    job.category = o.category;
    job.outputs = {"csv"};
    if (type == JobType::blend || type == JobType::sample) job.outputs.push_back(cfg.domain == "glyph" ? "ppm" : "svg");
    auto& s = job.spec;
    s.n_steps = cfg.sampler.n_steps;
    if (!o.pair.empty()) {
        if (o.pair.size() != 2) throw ConfigError("--pair needs exactly two concepts");
        s.p1 = o.pair[0];
        s.p2 = o.pair[1];
    }
    if (type == JobType::blend || type == JobType::sweep) {
        if (o.method.empty()) throw ConfigError("--method is required");
        s.method = parse_method(o.method);
        if (s.p1.empty() || (s.method != BlendMethod::single && s.p2.empty())) {
            throw ConfigError("--pair is required");
        }
    }
    if (o.weight) s.weight = *o.weight;
    if (o.switch_step) s.switch_step = *o.switch_step;
    if (!o.variant.empty()) s.variant = parse_variant(o.variant);
    if (o.ratio && !o.pattern.empty()) throw ConfigError("give either --pattern or --ratio");
    if (o.ratio) s.pattern = ratio_pattern(*o.ratio, s.n_steps);
    if (!o.pattern.empty()) {
        s.pattern = parse_pattern(o.pattern);
        if (s.pattern.size() != s.n_steps) throw ConfigError("--pattern length must equal the step count");
    }
    if (type == JobType::sweep) {
        if (o.grid.empty()) throw ConfigError("--grid is required");
        job.grid = parse_grid(o.grid);
    }
    if (type == JobType::rank && job.ballots.empty()) throw ConfigError("--ballots is required");
    if (job.n_samples == 0) throw ConfigError("--n-samples must be at least 1");
    return job;
}

void print_manifest(const RunManifest& m, const std::string& out_dir) {
    for (const auto& j : m.jobs) {
        for (const auto& f : j.outputs) std::cout << out_dir << "/" << f.path << "  " << f.sha256 << "\n";
    }
    std::cout << out_dir << "/manifest.json\n";
}

void log_line(const std::string& s) { std::cerr << s << "\n"; }

int run_job(const Options& o, JobType type, const std::vector<std::string>& argv) {
    auto [cfg, text] = base_config(o);
    cfg.jobs.push_back(make_job(o, type, cfg));
    // The output location is not part of the experiment, so it stays out of the hash.
    std::string provenance = text + "\n# command line:";
    for (std::size_t i = 1; i < argv.size(); ++i) {
        if (argv[i] == "--out-dir") {
            ++i;
            continue;
        }
        if (argv[i].starts_with("--out-dir=")) continue;
        provenance += " " + argv[i];
    }
    const RunManifest m = run_experiment(cfg, provenance, o.out_dir, log_line);
    print_manifest(m, o.out_dir);
    return 0;
}

int run_selftest() {
    int failed = 0;
    for (const auto& r : run_selftests()) {
        std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << "\n";
        failed += r.passed ? 0 : 1;
    }
    return failed == 0 ? 0 : 2;
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ValidationError*>(&e) ||
        dynamic_cast<const LookupError*>(&e) || dynamic_cast<const ShapeError*>(&e)) {
        return 1;
    }
    return 2;
}

} // namespace

int main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    CLI::App app{"Concept blending with block-conditioned diffusion models"};
    app.set_version_flag("--version", std::string(kToolVersion));
    Options o;
    app.add_option("--seed", o.seed, "Seed for sampling and training")->capture_default_str();
    app.add_option("--config", o.config_path, "Experiment config (INI)");
    app.add_option("--out-dir", o.out_dir, "Output directory")->capture_default_str();
    app.require_subcommand(1);

    auto model_opts = [&](CLI::App* c) {
        c->add_option("--domain", o.domain, "gmm or glyph")->check(CLI::IsMember({"gmm", "glyph"}));
        c->add_option("--checkpoint", o.checkpoint, "Trained model file (gmm default: exact oracle)");
        c->add_option("--sampler", o.sampler, "ddim or ddpm")->check(CLI::IsMember({"ddim", "ddpm"}));
        c->add_option("--n-steps", o.n_steps, "Inference steps");
        c->add_option("--guidance", o.guidance, "Classifier-free guidance scale");
        c->add_option("--n-samples", o.n_samples, "Samples per seed")->capture_default_str();
    };

    auto* train = app.add_subcommand("train", "Train a denoiser and its embedding table");
    train->add_option("--domain", o.domain, "gmm or glyph")->check(CLI::IsMember({"gmm", "glyph"}));
    train->add_option("--epochs", o.epochs);
    train->add_option("--steps-per-epoch", o.steps_per_epoch);
    train->add_option("--batch-size", o.batch_size);
    train->add_option("--learning-rate", o.learning_rate);
    train->add_option("--hidden", o.hidden, "Hidden width");

    auto* sample = app.add_subcommand("sample", "Generate single-concept samples");
    model_opts(sample);
    sample->add_option("--concepts", o.concepts, "Concepts (default: all)")->delimiter(',');

    auto blend_opts = [&](CLI::App* c) {
        c->add_option("--method", o.method, "textual, switch, alternate, unet or single");
        c->add_option("--pair", o.pair, "Two concepts, e.g. A,B")->delimiter(',');
    };
    auto* blend = app.add_subcommand("blend", "Generate and score one blend");
    model_opts(blend);
    blend_opts(blend);
    blend->add_option("--switch-step", o.switch_step, "switch: first step conditioned on p2");
    blend->add_option("--weight", o.weight, "textual: weight of p1");
    blend->add_option("--pattern", o.pattern, "alternate: per-step 1/2 pattern");
    blend->add_option("--ratio", o.ratio, "alternate: number of p1 steps spread evenly");
    blend->add_option("--variant", o.variant, "unet: enc2_dec1 or enc1_dec2");

    auto* sweep = app.add_subcommand("sweep", "Profile a blend over a parameter grid");
    model_opts(sweep);
    blend_opts(sweep);
    sweep->add_option("--grid", o.grid, "a:b, a:b:step or comma list");

    auto* eval = app.add_subcommand("eval", "Held-out loss and per-concept accuracy");
    model_opts(eval);
    eval->add_option("--concepts", o.concepts, "Concepts (default: all)")->delimiter(',');

    auto* rank = app.add_subcommand("rank", "Aggregate ranking ballots");
    rank->add_option("--ballots", o.ballots, "Ballots CSV")->required();
    rank->add_option("--category", o.category, "Table category label");
    rank->add_option("--pair", o.pair, "Pair label A,B")->delimiter(',');

    auto* run = app.add_subcommand("run", "Run every job of a config file");
    std::string run_config;
    run->add_option("config", run_config, "Config file (or use --config)");

    auto* selftest = app.add_subcommand("selftest", "Run the oracle and invariant checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << app.help() << "\n";
        app.exit(e);
        return 1;
    }

    try {
        if (selftest->parsed()) return run_selftest();
        if (run->parsed()) {
            const std::string path = run_config.empty() ? o.config_path : run_config;
            if (path.empty()) throw ConfigError("run: no config file given");
            if (o.seed) throw ConfigError("run: set seeds in the config file, not with --seed");
            const RunManifest m = run_experiment_file(path, o.out_dir, log_line);
            print_manifest(m, o.out_dir);
            return 0;
        }
        const std::pair<CLI::App*, JobType> jobs[] = {{train, JobType::train}, {sample, JobType::sample},
                                                      {blend, JobType::blend}, {sweep, JobType::sweep},
                                                      {eval, JobType::eval},   {rank, JobType::rank}};
        for (const auto& [cmd, type] : jobs) {
            if (cmd->parsed()) return run_job(o, type, args);
        }
        std::cerr << app.help() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }
}
