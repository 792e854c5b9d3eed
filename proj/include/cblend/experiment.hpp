#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cblend/config.hpp"
#include "cblend/diffusion.hpp"
#include "cblend/domains.hpp"

namespace cblend {

inline constexpr std::string_view kToolVersion = "cblend 1.0.0";

/// Lowercase hex SHA-256.
std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(std::string_view text);

struct OutputRecord {
    std::string path;  // relative to the output directory, '/' separated
    std::string sha256;
    std::size_t bytes = 0;
};

struct JobRecord {
    std::string name;
    std::string type;
    std::string schedule;  // JSON text of the blend metadata, empty when not applicable
    std::vector<OutputRecord> outputs;
};

struct RunManifest {
    std::string tool_version;
    std::string config_sha256;
    std::vector<std::uint64_t> seeds;
    std::string domain;
    std::string sampler;      // JSON text
    std::string checkpoint;   // sha256 of the model file, "oracle" for the GMM oracle
    std::vector<JobRecord> jobs;
    std::optional<OutputRecord> comparison;  // comparison.csv, written when a run has two or more blend jobs

    /// Deterministic JSON: fixed key order, no timestamps.
    std::string to_json() const;
};

/// Domain named by a config ("gmm" is the default world).
Domain make_domain(std::string_view kind);

/// JSON object for a blend spec (method parameters, prompts, n_steps).
std::string blend_spec_json(const BlendSpec& spec);

/// Progress sink for long jobs; may be empty.
using LogFn = std::function<void(const std::string&)>;

/**
 * Executes every job in file order, writing into out_dir/<job>/ and finally
 * out_dir/manifest.json. A train job replaces the model used by later jobs.
 */
RunManifest run_experiment(const ExperimentConfig& config, std::string_view config_text,
                           const std::filesystem::path& out_dir, const LogFn& log = {});

/// Reads, parses and runs a config file.
RunManifest run_experiment_file(const std::filesystem::path& config_path, const std::filesystem::path& out_dir,
                                const LogFn& log = {});

} // namespace cblend
