#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cblend/blend.hpp"
#include "cblend/denoiser.hpp"
#include "cblend/diffusion.hpp"
#include "cblend/trainer.hpp"

namespace cblend {

/**
 * INI text: [section] headers, key = value lines, full-line comments starting
 * with '#' or ';'. Keys keep file order; duplicates are an error.
 */
class IniFile {
public:
    struct Entry {
        std::string key;
        std::string value;
        std::size_t line = 0;
    };
    struct Section {
        std::string name;
        std::vector<Entry> entries;
        std::size_t line = 0;
    };

    static IniFile parse(std::string_view text);

    const std::vector<Section>& sections() const noexcept { return sections_; }
    const Section* find(std::string_view name) const;

private:
    std::vector<Section> sections_;
};

enum class JobType { train, sample, blend, sweep, eval, rank };

std::string_view job_type_name(JobType t);
JobType parse_job_type(std::string_view name);

struct JobConfig {
    std::string name;
    JobType type = JobType::blend;
    BlendSpec spec;                   // blend; sample uses p1 only
    std::vector<std::string> concepts;  // sample/eval: concepts to draw (empty = all)
    std::vector<double> grid;         // sweep
    std::size_t n_samples = 100;
    std::vector<std::string> outputs;  // subset of csv, svg, ppm
    std::string ballots;              // rank: path to ballots CSV
    std::string category;             // rank: table category label
};

struct ExperimentConfig {
    std::vector<std::uint64_t> seeds{0};
    std::string domain = "gmm";
    std::size_t t_train = 1000;
    double beta_min = 1e-4;
    double beta_max = 0.02;
    SamplerConfig sampler = SamplerConfig::gmm_defaults();
    std::optional<std::string> checkpoint;  // model to sample from; none = GMM oracle
    DenoiserDims dims;
    TrainConfig train;
    std::vector<JobConfig> jobs;

    NoiseSchedule schedule() const { return linear_schedule(t_train, beta_min, beta_max); }
};

/// Default hidden width per domain.
std::size_t default_hidden(std::string_view domain);

/**
 * Strict parse: unknown sections or keys raise ConfigError listing every
 * offender with its line. Domain-dependent defaults (guidance, clip box,
 * hidden width) apply unless set explicitly.
 */
ExperimentConfig parse_experiment_config(std::string_view text);

/// Parses "0:25" (inclusive integer range), "0:1:0.1" (start:stop:step) or a comma list.
std::vector<double> parse_grid(std::string_view text);

/// Comma-separated list, whitespace trimmed, empty items rejected.
std::vector<std::string> split_list(std::string_view text);

/// "1,2,2,1,..." or "1221..." with '1' = p1 and '2' = p2.
std::vector<bool> parse_pattern(std::string_view text);

} // namespace cblend
