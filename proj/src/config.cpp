#include "hcc/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "hcc/error.hpp"
#include "hcc/text_util.hpp"

namespace hcc {

namespace fs = std::filesystem;

namespace {

std::size_t to_size(const std::string& key, const std::string& value) {
    std::size_t out = 0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || ptr != value.data() + value.size())
        fail(Errc::InvalidConfig, key + ": expected a non-negative integer, got '" + value + "'");
    return out;
}

double to_real(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        double out = std::stod(value, &used);
        if (used != value.size() || !std::isfinite(out)) throw std::invalid_argument(value);
        return out;
    } catch (const std::exception&) {
        fail(Errc::InvalidConfig, key + ": expected a number, got '" + value + "'");
    }
}

bool to_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    fail(Errc::InvalidConfig, key + ": expected true or false, got '" + value + "'");
}

fs::path to_path(const std::string& value, const fs::path& base_dir) {
    if (value.empty()) return {};
    fs::path path(value);
    if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
    return path.lexically_normal();
}

std::string one_of(const std::string& key, const std::string& value, std::initializer_list<const char*> allowed) {
    for (const char* option : allowed)
        if (value == option) return value;
    std::string list;
    for (const char* option : allowed) list += (list.empty() ? "" : ", ") + std::string(option);
    fail(Errc::InvalidConfig, key + ": expected one of " + list + ", got '" + value + "'");
}

// Strips a trailing comment and unquotes a value.
std::string parse_value(std::string_view raw, std::size_t line_number) {
    std::string value = text::trim(raw);
    if (!value.empty() && value.front() == '"') {
        std::string out;
        bool closed = false;
        std::size_t i = 1;
        for (; i < value.size(); ++i) {
            char c = value[i];
            if (c == '\\' && i + 1 < value.size()) {
                char next = value[++i];
                out += next == 'n' ? '\n' : next == 't' ? '\t' : next;
            } else if (c == '"') {
                closed = true;
                ++i;
                break;
            } else {
                out += c;
            }
        }
        std::string rest = text::trim(std::string_view(value).substr(i));
        if (!closed || (!rest.empty() && rest.front() != '#'))
            fail(Errc::InvalidConfig, "line " + std::to_string(line_number) + ": malformed quoted value");
        return out;
    }
    auto hash = value.find('#');
    if (hash != std::string::npos) value = text::trim(std::string_view(value).substr(0, hash));
    return value;
}

}  // namespace

void apply_config_value(Config& config, const std::string& key, const std::string& value, const fs::path& base_dir) {
    auto& g = config.generation;
    auto& e = config.embedding;
    auto& r = config.run;
    if (key == "generation.backend") g.backend = one_of(key, value, {"scripted", "http"});
    else if (key == "generation.script") g.script = to_path(value, base_dir);
    else if (key == "generation.baseUrl") g.base_url = value;
    else if (key == "generation.model") g.model = value;
    else if (key == "generation.apiKeyEnv") g.api_key_env = value;
    else if (key == "generation.temperature") g.temperature = to_real(key, value);
    else if (key.rfind("generation.model.", 0) == 0) {
        try {
            g.model_overrides[prompt_name_from_string(key.substr(17))] = value;
        } catch (const Error&) {
            fail(Errc::InvalidConfig, key + ": unknown prompt name");
        }
    } else if (key == "embedding.backend") e.backend = one_of(key, value, {"hashing", "http"});
    else if (key == "embedding.dimension") e.dimension = to_size(key, value);
    else if (key == "embedding.seed") e.seed = to_size(key, value);
    else if (key == "embedding.baseUrl") e.base_url = value;
    else if (key == "embedding.model") e.model = value;
    else if (key == "embedding.apiKeyEnv") e.api_key_env = value;
    else if (key == "limits.maxConcurrentRequests") config.limits.max_concurrent_requests = to_size(key, value);
    else if (key == "limits.requestTimeoutSec") config.limits.request_timeout_sec = to_real(key, value);
    else if (key == "run.stepLimit") r.step_limit = to_size(key, value);
    else if (key == "run.wallClockBudgetSec") r.wall_clock_budget_sec = to_real(key, value);
    else if (key == "run.maxDebugRetries") r.max_debug_retries = to_size(key, value);
    else if (key == "run.maxPlanRetries") r.max_plan_retries = to_size(key, value);
    else if (key == "run.delta") r.delta = to_real(key, value);
    else if (key == "run.maxPrefetch") r.max_prefetch = to_size(key, value);
    else if (key == "run.workerLimit") r.worker_limit = to_size(key, value);
    else if (key == "run.perEventTruncationCap") r.per_event_truncation_cap = to_size(key, value);
    else if (key == "run.clock") r.clock = one_of(key, value, {"system", "simulated"}) == "system" ? ClockMode::System : ClockMode::Simulated;
    else if (key == "run.dir") r.dir = to_path(value, base_dir);
    else if (key == "run.directions") r.directions = to_size(key, value);
    else if (key == "run.suggestions") r.suggestions = to_size(key, value);
    else if (key == "run.seed") r.seed = to_size(key, value);
    else if (key == "run.formatAttempts") r.format_attempts = to_size(key, value);
    else if (key == "env.kind") config.env.kind = one_of(key, value, {"subprocess", "mock"});
    else if (key == "env.table") config.env.table = to_path(value, base_dir);
    else if (key == "env.interpreter") config.env.interpreter = value;
    else if (key == "env.timeoutSec") config.env.timeout_sec = to_real(key, value);
    else if (key == "env.maxConcurrent") config.env.max_concurrent = to_size(key, value);
    else if (key == "task.metricDirection") {
        try {
            config.task.metric_direction = direction_from_string(value);
        } catch (const Error&) {
            fail(Errc::InvalidConfig, key + ": expected higher or lower, got '" + value + "'");
        }
    } else if (key == "task.userInstructions") config.task.user_instructions = value;
    else if (key == "store.path") config.store = to_path(value, base_dir);
    else if (key == "warm.fastMode") config.warm_fast_mode = to_bool(key, value);
    else fail(Errc::InvalidConfig, "unknown key '" + key + "'");
    config.raw[key] = value;
}

Config parse_config(std::string_view text, const fs::path& base_dir) {
    Config config;
    std::string section;
    std::size_t line_number = 0;
    for (const auto& raw_line : text::split_lines(text)) {
        ++line_number;
        std::string line = text::trim(raw_line);
        if (line.empty() || line.front() == '#' || line.front() == ';') continue;
        if (line.front() == '[') {
            auto close = line.find(']');
            if (close == std::string::npos)
                fail(Errc::InvalidConfig, "line " + std::to_string(line_number) + ": unterminated section header");
            section = text::trim(std::string_view(line).substr(1, close - 1));
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos)
            fail(Errc::InvalidConfig, "line " + std::to_string(line_number) + ": expected key = value");
        std::string key = text::trim(std::string_view(line).substr(0, eq));
        if (key.empty()) fail(Errc::InvalidConfig, "line " + std::to_string(line_number) + ": empty key");
        if (!section.empty()) key = section + "." + key;
        try {
            apply_config_value(config, key, parse_value(std::string_view(line).substr(eq + 1), line_number), base_dir);
        } catch (const Error& e) {
            fail(Errc::InvalidConfig, "line " + std::to_string(line_number) + ": " + e.what());
        }
    }
    validate(config);
    return config;
}

Config load_config(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::InvalidConfig, "cannot read config " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    try {
        return parse_config(buffer.str(), path.parent_path());
    } catch (const Error& e) {
        fail(Errc::InvalidConfig, path.string() + ": " + e.what());
    }
}

void validate(const Config& config) {
    const auto& r = config.run;
    if (!(r.delta >= 0.0 && r.delta < 1.0)) fail(Errc::InvalidConfig, "run.delta must lie in [0, 1)");
    if (r.wall_clock_budget_sec < 0.0) fail(Errc::InvalidConfig, "run.wallClockBudgetSec must be >= 0");
    if (r.worker_limit == 0) fail(Errc::InvalidConfig, "run.workerLimit must be positive");
    if (r.max_prefetch == 0) fail(Errc::InvalidConfig, "run.maxPrefetch must be positive");
    if (r.per_event_truncation_cap == 0) fail(Errc::InvalidConfig, "run.perEventTruncationCap must be positive");
    if (r.directions < 3) fail(Errc::InvalidConfig, "run.directions must be at least 3");
    if (r.suggestions == 0) fail(Errc::InvalidConfig, "run.suggestions must be positive");
    if (r.format_attempts == 0) fail(Errc::InvalidConfig, "run.formatAttempts must be positive");
    if (config.embedding.dimension == 0) fail(Errc::InvalidConfig, "embedding.dimension must be positive");
    if (config.limits.max_concurrent_requests == 0) fail(Errc::InvalidConfig, "limits.maxConcurrentRequests must be positive");
    if (config.limits.request_timeout_sec <= 0) fail(Errc::InvalidConfig, "limits.requestTimeoutSec must be positive");
    if (config.env.timeout_sec <= 0) fail(Errc::InvalidConfig, "env.timeoutSec must be positive");
    if (config.generation.backend == "http" && (config.generation.base_url.empty() || config.generation.model.empty()))
        fail(Errc::InvalidConfig, "http generation needs generation.baseUrl and generation.model");
    if (config.embedding.backend == "http" && (config.embedding.base_url.empty() || config.embedding.model.empty()))
        fail(Errc::InvalidConfig, "http embedding needs embedding.baseUrl and embedding.model");
    if (config.env.kind == "mock" && config.env.table.empty()) fail(Errc::InvalidConfig, "env.kind = mock needs env.table");
}

nlohmann::json to_json(const Config& config) {
    nlohmann::json json = nlohmann::json::object();
    for (const auto& [key, value] : config.raw) json[key] = value;
    return json;
}

}  // namespace hcc
