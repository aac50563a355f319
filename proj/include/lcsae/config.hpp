#pragma once

#include <filesystem>
#include <string>

#include "lcsae/data.hpp"
#include "lcsae/sampler.hpp"

namespace lcsae {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Everything a reproducible run needs, loaded from a single structured-text
/// (JSON) file; command-line flags override individual fields.
struct RunConfig {
    std::filesystem::path responses_path;
    std::filesystem::path cells_path;
    std::filesystem::path output_dir;

    ItemSchema schema;
    AgeClassMap age_classes;
    int n_districts = 0;

    ModelSpec model;      // C=5, proportional odds, K=12 by default
    PriorSpec prior;      // B=16 by default
    SamplerConfig sampler;  // 120000 / 15000 / 3 by default

    void validate() const;
};

RunConfig load_run_config(const std::filesystem::path& path);
void save_run_config(const std::filesystem::path& path, const RunConfig& config);

/// Stable content hash of a config (covers everything except the output dir),
/// recorded in run manifests and verified on reuse.
std::string config_hash(const RunConfig& config);

}  // namespace lcsae
