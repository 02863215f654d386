#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "microtrip/metrics.hpp"
#include "microtrip/network.hpp"
#include "microtrip/postgen.hpp"
#include "microtrip/train.hpp"

namespace microtrip::cli {

inline constexpr int kRunConfigSchema = 1;

struct IngestSettings {
    double stop_speed = 0.5;
    double min_duration = 34.0;
};

struct ClusterSettings {
    std::size_t k = 4;
    std::uint64_t seed = 0;
    double train_frac = 0.8;
};

struct MarkovSettings {
    double delta_v = 0.5;
    double alpha = 0.0;
};

/// The engine is chosen per invocation and is not part of the config, so
/// one run can compare several engines under a single digest.
struct GenerateSettings {
    /// 0 generates one trip per condition in order; otherwise n conditions are
    /// drawn with the boost weights.
    std::size_t n = 0;
    std::uint64_t seed = 0;
    GenerationConfig postprocess;
};

/// Settings of every command. Paths are not part of the config so that the
/// digest does not depend on where a run lives.
struct RunConfig {
    IngestSettings ingest;
    ClusterSettings cluster;
    MarkovSettings markov;
    ArchConfig arch = arch_preset("csdi-tiny");
    TrainConfig train;
    GenerateSettings generate;
    MetricsConfig metrics;

    /// Canonical form with every default filled in.
    nlohmann::json to_json() const;
    /// Sections and keys are optional; unknown ones throw Config.
    static RunConfig from_json(const nlohmann::json& j);
    void validate() const;
    /// SHA-256 of the canonical JSON.
    std::string digest() const;
};

/// Reads a JSON config file. Missing file: NotFound; bad JSON: Config.
RunConfig load_run_config(const std::filesystem::path& path);

} // namespace microtrip::cli
