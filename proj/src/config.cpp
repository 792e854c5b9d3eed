#include "cblend/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <set>

namespace cblend {
namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string where(const IniFile::Entry& e) { return "line " + std::to_string(e.line) + " (" + e.key + ")"; }

double to_double(const IniFile::Entry& e) {
    double v = 0.0;
    const auto s = trim(e.value);
    auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || end != s.data() + s.size() || !std::isfinite(v)) {
        throw ConfigError(where(e) + ": '" + e.value + "' is not a finite number");
    }
    return v;
}

std::uint64_t to_u64(const IniFile::Entry& e) {
    std::uint64_t v = 0;
    const auto s = trim(e.value);
    auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || end != s.data() + s.size()) {
        throw ConfigError(where(e) + ": '" + e.value + "' is not a non-negative integer");
    }
    return v;
}

std::size_t to_size(const IniFile::Entry& e) { return static_cast<std::size_t>(to_u64(e)); }

template <class Fn>
auto wrap(const IniFile::Entry& e, Fn fn) {
    try {
        return fn(e.value);
    } catch (const ConfigError& err) {
        throw ConfigError(where(e) + ": " + err.what());
    }
}

using Handler = std::function<void(const IniFile::Entry&)>;

} // namespace

IniFile IniFile::parse(std::string_view text) {
    IniFile ini;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        const auto raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        const auto line = trim(raw);
        if (line.empty() || line.front() == '#' || line.front() == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("line " + std::to_string(line_no) + ": unterminated section header");
            const std::string name(trim(line.substr(1, line.size() - 2)));
            if (name.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty section name");
            for (const auto& s : ini.sections_) {
                if (s.name == name) {
                    throw ConfigError("line " + std::to_string(line_no) + ": duplicate section [" + name + "]");
                }
            }
            ini.sections_.push_back({name, {}, line_no});
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
        }
        if (ini.sections_.empty()) throw ConfigError("line " + std::to_string(line_no) + ": key outside any section");
        const std::string key(trim(line.substr(0, eq)));
        const std::string value(trim(line.substr(eq + 1)));
        if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
        auto& sec = ini.sections_.back();
        for (const auto& e : sec.entries) {
            if (e.key == key) {
                throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key + "' in [" + sec.name +
                                  "]");
            }
        }
        sec.entries.push_back({key, value, line_no});
    }
    return ini;
}

const IniFile::Section* IniFile::find(std::string_view name) const {
    for (const auto& s : sections_)
        if (s.name == name) return &s;
    return nullptr;
}

std::string_view job_type_name(JobType t) {
    switch (t) {
    case JobType::train: return "train";
    case JobType::sample: return "sample";
    case JobType::blend: return "blend";
    case JobType::sweep: return "sweep";
    case JobType::eval: return "eval";
    case JobType::rank: return "rank";
    }
    return "?";
}

JobType parse_job_type(std::string_view name) {
    for (JobType t : {JobType::train, JobType::sample, JobType::blend, JobType::sweep, JobType::eval, JobType::rank})
        if (job_type_name(t) == name) return t;
    throw ConfigError("unknown job type '" + std::string(name) + "'");
}

std::size_t default_hidden(std::string_view domain) { return domain == "glyph" ? 512 : 64; }

std::vector<std::string> split_list(std::string_view text) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (true) {
        const auto comma = text.find(',', pos);
        const auto item = trim(text.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
        if (item.empty()) throw ConfigError("empty item in list '" + std::string(text) + "'");
        out.emplace_back(item);
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
    }
    return out;
}

std::vector<double> parse_grid(std::string_view text) {
    auto num = [](std::string_view s) {
        s = trim(s);
        double v = 0.0;
        auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || end != s.data() + s.size() || !std::isfinite(v)) {
            throw ConfigError("grid value '" + std::string(s) + "' is not a number");
        }
        return v;
    };
    text = trim(text);
    if (text.empty()) throw ConfigError("grid is empty");
    if (text.find(':') != std::string_view::npos && text.find(',') == std::string_view::npos) {
        std::vector<std::string_view> parts;
        std::size_t pos = 0;
        while (true) {
            const auto c = text.find(':', pos);
            parts.push_back(text.substr(pos, c == std::string_view::npos ? std::string_view::npos : c - pos));
            if (c == std::string_view::npos) break;
            pos = c + 1;
        }
        if (parts.size() > 3) throw ConfigError("grid range '" + std::string(text) + "' has too many fields");
        const double lo = num(parts[0]);
        const double hi = num(parts[1]);
        const double step = parts.size() == 3 ? num(parts[2]) : 1.0;
        if (!(step > 0.0) || hi < lo) throw ConfigError("grid range '" + std::string(text) + "' is empty or invalid");
        std::vector<double> out;
        const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
        if (n > 100000) throw ConfigError("grid range '" + std::string(text) + "' is too long");
        for (std::size_t i = 0; i < n; ++i) out.push_back(lo + step * static_cast<double>(i));
        return out;
    }
    std::vector<double> out;
    for (const auto& item : split_list(text)) out.push_back(num(item));
    return out;
}

std::vector<bool> parse_pattern(std::string_view text) {
    std::vector<bool> out;
    for (char c : text) {
        if (c == '1') out.push_back(true);
        else if (c == '2') out.push_back(false);
        else if (c != ',' && c != ' ') throw ConfigError("pattern may contain only '1', '2', ',' and spaces");
    }
    if (out.empty()) throw ConfigError("pattern is empty");
    return out;
}

ExperimentConfig parse_experiment_config(std::string_view text) {
    const IniFile ini = IniFile::parse(text);
    ExperimentConfig cfg;
    std::vector<std::string> unknown;

    auto run_section = [&](const IniFile::Section& sec, const std::map<std::string, Handler>& handlers) {
        for (const auto& e : sec.entries) {
            auto it = handlers.find(e.key);
            if (it == handlers.end()) {
                unknown.push_back("[" + sec.name + "] " + e.key + " (line " + std::to_string(e.line) + ")");
                continue;
            }
            it->second(e);
        }
    };

    // Domain first: several defaults depend on it.
    if (const auto* d = ini.find("domain")) {
        run_section(*d, {{"kind", [&](const IniFile::Entry& e) {
                              if (e.value != "gmm" && e.value != "glyph") {
                                  throw ConfigError(where(e) + ": domain must be 'gmm' or 'glyph'");
                              }
                              cfg.domain = e.value;
                          }}});
    }
    cfg.sampler = cfg.domain == "glyph" ? SamplerConfig::glyph_defaults() : SamplerConfig::gmm_defaults();
    cfg.dims.hidden = default_hidden(cfg.domain);

    // Global sections before jobs, so job defaults see the final sampler settings.
    std::vector<const IniFile::Section*> ordered;
    for (const auto& sec : ini.sections())
        if (!sec.name.starts_with("job.")) ordered.push_back(&sec);
    for (const auto& sec : ini.sections())
        if (sec.name.starts_with("job.")) ordered.push_back(&sec);

    for (const IniFile::Section* sp : ordered) {
        const auto& sec = *sp;
        if (sec.name == "domain") continue;
        if (sec.name == "run") {
            run_section(sec, {{"seed", [&](const IniFile::Entry& e) { cfg.seeds = {to_u64(e)}; }},
                              {"seeds", [&](const IniFile::Entry& e) {
                                   cfg.seeds.clear();
                                   for (const auto& s : wrap(e, split_list)) {
                                       cfg.seeds.push_back(to_u64(IniFile::Entry{e.key, s, e.line}));
                                   }
                               }}});
        } else if (sec.name == "schedule") {
            run_section(sec, {{"t_train", [&](const IniFile::Entry& e) { cfg.t_train = to_size(e); }},
                              {"beta_min", [&](const IniFile::Entry& e) { cfg.beta_min = to_double(e); }},
                              {"beta_max", [&](const IniFile::Entry& e) { cfg.beta_max = to_double(e); }}});
        } else if (sec.name == "sampler") {
            run_section(sec, {{"kind", [&](const IniFile::Entry& e) { cfg.sampler.kind = wrap(e, parse_sampler); }},
                              {"n_steps", [&](const IniFile::Entry& e) { cfg.sampler.n_steps = to_size(e); }},
                              {"eta", [&](const IniFile::Entry& e) { cfg.sampler.eta = to_double(e); }},
                              {"guidance", [&](const IniFile::Entry& e) { cfg.sampler.guidance_scale = to_double(e); }},
                              {"clip_min", [&](const IniFile::Entry& e) { cfg.sampler.clip_min = to_double(e); }},
                              {"clip_max", [&](const IniFile::Entry& e) { cfg.sampler.clip_max = to_double(e); }}});
        } else if (sec.name == "model") {
            run_section(sec, {{"checkpoint", [&](const IniFile::Entry& e) { cfg.checkpoint = e.value; }},
                              {"hidden", [&](const IniFile::Entry& e) { cfg.dims.hidden = to_size(e); }},
                              {"embed", [&](const IniFile::Entry& e) { cfg.dims.embed = to_size(e); }},
                              {"time", [&](const IniFile::Entry& e) { cfg.dims.time = to_size(e); }}});
        } else if (sec.name == "train") {
            auto& t = cfg.train;
            run_section(sec, {{"epochs", [&](const IniFile::Entry& e) { t.epochs = to_size(e); }},
                              {"batch_size", [&](const IniFile::Entry& e) { t.batch_size = to_size(e); }},
                              {"steps_per_epoch", [&](const IniFile::Entry& e) { t.steps_per_epoch = to_size(e); }},
                              {"learning_rate", [&](const IniFile::Entry& e) { t.learning_rate = to_double(e); }},
                              {"beta1", [&](const IniFile::Entry& e) { t.beta1 = to_double(e); }},
                              {"beta2", [&](const IniFile::Entry& e) { t.beta2 = to_double(e); }},
                              {"adam_eps", [&](const IniFile::Entry& e) { t.adam_eps = to_double(e); }},
                              {"p_uncond", [&](const IniFile::Entry& e) { t.p_uncond = to_double(e); }}});
        } else if (sec.name.starts_with("job.")) {
            JobConfig job;
            job.name = sec.name.substr(4);
            if (job.name.empty() || job.name.find_first_of("/\\.") != std::string::npos) {
                throw ConfigError("line " + std::to_string(sec.line) + ": invalid job name '" + job.name + "'");
            }
            bool has_type = false;
            bool has_method = false;
            bool has_pattern = false;
            std::optional<std::size_t> ratio;
            auto& s = job.spec;
            run_section(
                sec,
                {{"type", [&](const IniFile::Entry& e) { job.type = wrap(e, parse_job_type), has_type = true; }},
                 {"method", [&](const IniFile::Entry& e) { s.method = wrap(e, parse_method), has_method = true; }},
                 {"p1", [&](const IniFile::Entry& e) { s.p1 = e.value; }},
                 {"p2", [&](const IniFile::Entry& e) { s.p2 = e.value; }},
                 {"pair",
                  [&](const IniFile::Entry& e) {
                      const auto p = wrap(e, split_list);
                      if (p.size() != 2) throw ConfigError(where(e) + ": pair needs exactly two concepts");
                      s.p1 = p[0];
                      s.p2 = p[1];
                  }},
                 {"weight", [&](const IniFile::Entry& e) { s.weight = to_double(e); }},
                 {"switch_step", [&](const IniFile::Entry& e) { s.switch_step = to_size(e); }},
                 {"pattern", [&](const IniFile::Entry& e) { s.pattern = wrap(e, parse_pattern), has_pattern = true; }},
                 {"ratio", [&](const IniFile::Entry& e) { ratio = to_size(e); }},
                 {"variant", [&](const IniFile::Entry& e) { s.variant = wrap(e, parse_variant); }},
                 {"concepts", [&](const IniFile::Entry& e) { job.concepts = wrap(e, split_list); }},
                 {"grid", [&](const IniFile::Entry& e) { job.grid = wrap(e, parse_grid); }},
                 {"n_samples", [&](const IniFile::Entry& e) { job.n_samples = to_size(e); }},
                 {"outputs",
                  [&](const IniFile::Entry& e) {
                      job.outputs = wrap(e, split_list);
                      for (const auto& o : job.outputs) {
                          if (o != "csv" && o != "svg" && o != "ppm") {
                              throw ConfigError(where(e) + ": unknown output kind '" + o + "'");
                          }
                      }
                  }},
                 {"ballots", [&](const IniFile::Entry& e) { job.ballots = e.value; }},
                 {"category", [&](const IniFile::Entry& e) { job.category = e.value; }}});
            const std::string at = "[" + sec.name + "] (line " + std::to_string(sec.line) + ")";
            if (!has_type) throw ConfigError(at + ": missing 'type'");
            if (ratio && has_pattern) throw ConfigError(at + ": give either 'pattern' or 'ratio', not both");
            if (ratio) s.pattern = ratio_pattern(*ratio, cfg.sampler.n_steps);
            s.n_steps = cfg.sampler.n_steps;
            if ((job.type == JobType::blend || job.type == JobType::sweep) && !has_method) {
                throw ConfigError(at + ": missing 'method'");
            }
            if (job.type == JobType::blend || job.type == JobType::sweep) {
                if (s.p1.empty() || (s.method != BlendMethod::single && s.p2.empty())) {
                    throw ConfigError(at + ": missing prompt pair (p1/p2 or pair)");
                }
            }
            if (job.type == JobType::sweep && job.grid.empty()) throw ConfigError(at + ": missing 'grid'");
            if (job.type == JobType::rank && job.ballots.empty()) throw ConfigError(at + ": missing 'ballots'");
            if (job.n_samples == 0) throw ConfigError(at + ": n_samples must be at least 1");
            if (job.outputs.empty()) {
                job.outputs = {"csv"};
                if (job.type == JobType::blend || job.type == JobType::sample) {
                    job.outputs.push_back(cfg.domain == "glyph" ? "ppm" : "svg");
                }
            }
            cfg.jobs.push_back(std::move(job));
        } else {
            unknown.push_back("[" + sec.name + "] (line " + std::to_string(sec.line) + ")");
        }
    }
    if (!unknown.empty()) {
        std::string msg = "unknown configuration keys:";
        for (const auto& u : unknown) msg += "\n  " + u;
        throw ConfigError(msg);
    }
    if (cfg.seeds.empty()) throw ConfigError("[run] seeds is empty");

    // Patterns must match the final step count.
    for (auto& j : cfg.jobs) {
        j.spec.n_steps = cfg.sampler.n_steps;
        if (j.spec.method == BlendMethod::alternate && !j.spec.pattern.empty() &&
            j.spec.pattern.size() != cfg.sampler.n_steps) {
            throw ConfigError("[job." + j.name + "]: pattern length " + std::to_string(j.spec.pattern.size()) +
                              " differs from n_steps " + std::to_string(cfg.sampler.n_steps));
        }
    }

    cfg.train.seed = cfg.seeds.front();
    cfg.train.t_train = cfg.t_train;
    cfg.train.beta_min = cfg.beta_min;
    cfg.train.beta_max = cfg.beta_max;
    cfg.sampler.validate(cfg.t_train);
    cfg.train.validate();
    return cfg;
}

} // namespace cblend
