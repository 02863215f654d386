#include "run_config.hpp"

#include <fstream>
#include <sstream>

#include "microtrip/digest.hpp"
#include "microtrip/error.hpp"

namespace microtrip::cli {

namespace {

void require_object(const nlohmann::json& j, const std::string& section) {
    if (!j.is_object()) {
        fail(ErrorCode::Config, "config section '" + section + "' must be an object");
    }
}

[[noreturn]] void unknown_key(const std::string& section, const std::string& key) {
    fail(ErrorCode::Config, "config " + section + ": unknown key '" + key + "'");
}

} // namespace

nlohmann::json RunConfig::to_json() const {
    return {
        {"schema_version", kRunConfigSchema},
        {"ingest", {{"stop_speed", ingest.stop_speed}, {"min_duration", ingest.min_duration}}},
        {"cluster", {{"k", cluster.k}, {"seed", cluster.seed}, {"train_frac", cluster.train_frac}}},
        {"markov", {{"delta_v", markov.delta_v}, {"alpha", markov.alpha}}},
        {"model", {{"arch", arch.to_json()}}},
        {"train", train.to_json()},
        {"generation",
         {{"n", generate.n},
          {"seed", generate.seed},
          {"postprocess", generate.postprocess.to_json()}}},
        {"metrics", metrics.to_json()},
    };
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
    RunConfig c;
    require_object(j, "root");
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "schema_version") {
                if (value.get<int>() != kRunConfigSchema) {
                    fail(ErrorCode::Version, "unsupported config schema_version " + value.dump());
                }
            } else if (key == "ingest") {
                require_object(value, key);
                for (const auto& [k, v] : value.items()) {
                    if (k == "stop_speed") {
                        c.ingest.stop_speed = v.get<double>();
                    } else if (k == "min_duration") {
                        c.ingest.min_duration = v.get<double>();
                    } else {
                        unknown_key(key, k);
                    }
                }
            } else if (key == "cluster") {
                require_object(value, key);
                for (const auto& [k, v] : value.items()) {
                    if (k == "k") {
                        c.cluster.k = v.get<std::size_t>();
                    } else if (k == "seed") {
                        c.cluster.seed = v.get<std::uint64_t>();
                    } else if (k == "train_frac") {
                        c.cluster.train_frac = v.get<double>();
                    } else {
                        unknown_key(key, k);
                    }
                }
            } else if (key == "markov") {
                require_object(value, key);
                for (const auto& [k, v] : value.items()) {
                    if (k == "delta_v") {
                        c.markov.delta_v = v.get<double>();
                    } else if (k == "alpha") {
                        c.markov.alpha = v.get<double>();
                    } else {
                        unknown_key(key, k);
                    }
                }
            } else if (key == "model") {
                require_object(value, key);
                for (const auto& [k, v] : value.items()) {
                    if (k != "arch") {
                        unknown_key(key, k);
                    }
                    c.arch = v.is_string() ? arch_preset(v.get<std::string>())
                                           : ArchConfig::from_json(v);
                }
            } else if (key == "train") {
                c.train = TrainConfig::from_json(value);
            } else if (key == "generation") {
                require_object(value, key);
                for (const auto& [k, v] : value.items()) {
                    if (k == "n") {
                        c.generate.n = v.get<std::size_t>();
                    } else if (k == "seed") {
                        c.generate.seed = v.get<std::uint64_t>();
                    } else if (k == "postprocess") {
                        c.generate.postprocess = GenerationConfig::from_json(v);
                    } else {
                        unknown_key(key, k);
                    }
                }
            } else if (key == "metrics") {
                c.metrics = MetricsConfig::from_json(value);
            } else {
                unknown_key("root", key);
            }
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::Config, std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

void RunConfig::validate() const {
    if (!(ingest.stop_speed >= 0.0) || !(ingest.min_duration >= 1.0)) {
        fail(ErrorCode::Config, "config ingest: need stop_speed >= 0 and min_duration >= 1");
    }
    if (cluster.k < 1) {
        fail(ErrorCode::Config, "config cluster: k must be at least 1");
    }
    if (!(cluster.train_frac > 0.0 && cluster.train_frac < 1.0)) {
        fail(ErrorCode::Config, "config cluster: train_frac must lie in (0, 1)");
    }
    if (!(markov.delta_v > 0.0) || !(markov.alpha >= 0.0)) {
        fail(ErrorCode::Config, "config markov: need delta_v > 0 and alpha >= 0");
    }
    try {
        arch.validate();
        train.validate();
        generate.postprocess.validate();
        metrics.validate();
    } catch (const Error& e) {
        fail(ErrorCode::Config, e.what());
    }
}

std::string RunConfig::digest() const {
    return sha256_hex(to_json().dump());
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        fail(ErrorCode::NotFound, "config file not found: " + path.string());
    }
    std::stringstream ss;
    ss << in.rdbuf();
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(ss.str());
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::Config, "config file is not valid JSON: " + std::string(e.what()));
    }
    return RunConfig::from_json(j);
}

} // namespace microtrip::cli
