#pragma once

// Run configuration: one key=value document with [section] headers, e.g.
//
//   [generation]
//   backend = "scripted"
//   script = "script.json"
//   [run]
//   stepLimit = 120
//
// Relative paths resolve against the config file's directory.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "hcc/event_log.hpp"
#include "hcc/prompts.hpp"

namespace hcc {

enum class ClockMode { System, Simulated };

struct GenerationConfig {
    /// "scripted" or "http".
    std::string backend = "scripted";
    std::filesystem::path script;
    std::string base_url;
    std::string model;
    /// Name of the environment variable holding the API key.
    std::string api_key_env;
    std::map<PromptName, std::string> model_overrides;
    std::optional<double> temperature;
};

struct EmbeddingConfig {
    /// "hashing" or "http".
    std::string backend = "hashing";
    std::size_t dimension = 64;
    std::uint64_t seed = 0;
    std::string base_url;
    std::string model;
    std::string api_key_env;
};

struct LimitsConfig {
    std::size_t max_concurrent_requests = 4;
    double request_timeout_sec = 600.0;
};

struct RunConfig {
    std::size_t step_limit = 200;
    double wall_clock_budget_sec = 86400.0;
    std::size_t max_debug_retries = 3;
    std::size_t max_plan_retries = 3;
    double delta = 0.60;
    std::size_t max_prefetch = 3;
    std::size_t worker_limit = 4;
    std::size_t per_event_truncation_cap = 4000;
    ClockMode clock = ClockMode::System;
    /// Run directory; empty means "runs/<taskId>" under the working directory.
    std::filesystem::path dir;
    std::size_t directions = 3;
    std::size_t suggestions = 2;
    std::uint64_t seed = 0;
    std::size_t format_attempts = 2;
};

struct EnvConfig {
    /// "subprocess" or "mock".
    std::string kind = "subprocess";
    std::filesystem::path table;
    std::string interpreter = "python3";
    double timeout_sec = 3600.0;
    std::size_t max_concurrent = 4;
};

struct TaskConfig {
    MetricDirection metric_direction = MetricDirection::HigherIsBetter;
    std::string user_instructions;
};

struct Config {
    GenerationConfig generation;
    EmbeddingConfig embedding;
    LimitsConfig limits;
    RunConfig run;
    EnvConfig env;
    TaskConfig task;
    std::filesystem::path store;
    bool warm_fast_mode = false;
    /// Every key as written ("section.key" -> raw value), for result.json.
    std::map<std::string, std::string> raw;
};

/// Throws InvalidConfig with the offending line.
Config parse_config(std::string_view text, const std::filesystem::path& base_dir = {});
/// Throws InvalidConfig (including a missing file).
Config load_config(const std::filesystem::path& path);

/// Applies one "section.key" = value assignment (also used for CLI overrides).
void apply_config_value(Config& config, const std::string& key, const std::string& value,
                        const std::filesystem::path& base_dir = {});

/// Range checks across keys. Throws InvalidConfig.
void validate(const Config& config);

nlohmann::json to_json(const Config& config);

}  // namespace hcc
