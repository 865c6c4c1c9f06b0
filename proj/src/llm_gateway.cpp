#include "hcc/llm_gateway.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>

#include <httplib.h>

#include "hcc/error.hpp"
#include "hcc/event_log.hpp"

namespace hcc {

std::string generate(GenerationBackend& backend, const GenerationRequest& request) {
    if (request.rendered_prompt.empty()) fail(Errc::PreconditionFailed, "empty rendered prompt");
    return backend.generate(request);
}

Vector embed(Embedder& embedder, std::string_view text, const std::string& thread) {
    if (text.empty()) fail(Errc::PreconditionFailed, "cannot embed empty text");
    Vector raw = embedder.embed_raw(text, thread);
    if (raw.size() != embedder.dimension()) {
        fail(Errc::DimensionDrift, "backend returned dimension " + std::to_string(raw.size()) + ", expected " +
                                       std::to_string(embedder.dimension()));
    }
    try {
        return normalized(raw);
    } catch (const Error&) {
        fail(Errc::BackendFailure, "embedding backend returned a zero vector");
    }
}

// ---- scripted --------------------------------------------------------------

bool ScriptRule::matches(const GenerationRequest& request) const {
    if (prompt && *prompt != request.prompt) return false;
    if (thread) {
        const std::string& pattern = *thread;
        if (!pattern.empty() && pattern.back() == '*') {
            if (request.thread.compare(0, pattern.size() - 1, pattern, 0, pattern.size() - 1) != 0) return false;
        } else if (pattern != request.thread) {
            return false;
        }
    }
    if (contains && request.rendered_prompt.find(*contains) == std::string::npos) return false;
    return true;
}

ScriptedBackend::ScriptedBackend(std::vector<ScriptRule> rules, bool strict) : strict_(strict) {
    for (auto& rule : rules) slots_.push_back({std::move(rule), false});
}

std::unique_ptr<ScriptedBackend> ScriptedBackend::from_json(const nlohmann::json& script) {
    try {
        auto backend = std::make_unique<ScriptedBackend>(std::vector<ScriptRule>{}, script.value("strict", false));
        for (const auto& item : script.at("rules")) {
            ScriptRule rule;
            if (item.contains("prompt") && item["prompt"] != "*")
                rule.prompt = prompt_name_from_string(item["prompt"].get<std::string>());
            if (item.contains("thread")) rule.thread = item["thread"].get<std::string>();
            if (item.contains("contains")) rule.contains = item["contains"].get<std::string>();
            rule.response = item.value("response", "");
            rule.echo = item.value("echo", false);
            rule.repeat = item.value("repeat", false);
            const std::string inject = item.value("inject", "");
            if (inject == "timeout") rule.inject = ScriptRule::Inject::Timeout;
            else if (inject == "failure") rule.inject = ScriptRule::Inject::Failure;
            else if (!inject.empty()) fail(Errc::InvalidConfig, "unknown inject '" + inject + "'");
            backend->add(std::move(rule));
        }
        return backend;
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::InvalidConfig, std::string("malformed script: ") + e.what());
    }
}

std::unique_ptr<ScriptedBackend> ScriptedBackend::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::InvalidConfig, "cannot read script " + path.string());
    try {
        return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        fail(Errc::InvalidConfig, path.string() + ": " + e.what());
    }
}

void ScriptedBackend::add(ScriptRule rule) {
    std::lock_guard lock(mutex_);
    slots_.push_back({std::move(rule), false});
}

std::size_t ScriptedBackend::remaining() const {
    std::lock_guard lock(mutex_);
    std::size_t count = 0;
    for (const auto& slot : slots_)
        if (!slot.consumed && !slot.rule.repeat) ++count;
    return count;
}

std::size_t ScriptedBackend::calls() const {
    std::lock_guard lock(mutex_);
    return calls_;
}

std::string ScriptedBackend::generate(const GenerationRequest& request) {
    ScriptRule rule;
    {
        std::lock_guard lock(mutex_);
        ++calls_;
        Slot* chosen = nullptr;
        for (auto& slot : slots_) {
            if (slot.consumed) continue;
            if (slot.rule.matches(request)) {
                chosen = &slot;
                break;
            }
            if (strict_ && !slot.rule.repeat) break;
        }
        if (!chosen) {
            fail(Errc::ScriptExhausted, "no scripted response for " + std::string(to_string(request.prompt)) +
                                            " on thread " + request.thread);
        }
        if (!chosen->rule.repeat) chosen->consumed = true;
        rule = chosen->rule;
    }
    switch (rule.inject) {
        case ScriptRule::Inject::Timeout:
            fail(Errc::Timeout, "injected timeout after " + std::to_string(request.timeout_sec) + "s");
        case ScriptRule::Inject::Failure: fail(Errc::BackendFailure, "injected backend failure");
        case ScriptRule::Inject::None: break;
    }
    return rule.echo ? request.rendered_prompt : rule.response;
}

// ---- hashing embedder ------------------------------------------------------

namespace {

std::uint64_t fnv1a(std::string_view text, std::uint64_t seed) {
    std::uint64_t hash = 14695981039346656037ull ^ (seed * 0x9E3779B97F4A7C15ull);
    for (unsigned char c : text) {
        hash ^= c;
        hash *= 1099511628211ull;
    }
    return hash;
}

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

double unit_uniform(std::uint64_t& state) {
    // (0, 1]
    return (static_cast<double>(splitmix64(state) >> 11) + 1.0) * 0x1.0p-53;
}

void add_direction(Vector& acc, std::uint64_t key) {
    std::uint64_t state = key;
    for (std::size_t d = 0; d < acc.size(); d += 2) {
        double r = std::sqrt(-2.0 * std::log(unit_uniform(state)));
        double theta = 2.0 * std::numbers::pi * unit_uniform(state);
        acc[d] += r * std::cos(theta);
        if (d + 1 < acc.size()) acc[d + 1] += r * std::sin(theta);
    }
}

}  // namespace

HashingEmbedder::HashingEmbedder(std::size_t dimension, std::uint64_t seed) : dimension_(dimension), seed_(seed) {
    if (dimension_ == 0) fail(Errc::InvalidConfig, "embedding dimension must be positive");
}

Vector HashingEmbedder::embed_raw(std::string_view text, const std::string&) {
    Vector acc(dimension_, 0.0);
    std::string word;
    bool any = false;
    auto flush = [&] {
        if (word.empty()) return;
        add_direction(acc, fnv1a(word, seed_));
        any = true;
        word.clear();
    };
    for (unsigned char c : text) {
        if (std::isalnum(c) || c >= 0x80) word += static_cast<char>(std::tolower(c));
        else flush();
    }
    flush();
    if (!any) add_direction(acc, fnv1a(text, seed_ + 1));
    return acc;
}

// ---- HTTP ------------------------------------------------------------------

namespace {

struct ParsedUrl {
    std::string scheme_host_port;
    std::string path_prefix;
};

ParsedUrl parse_base_url(const std::string& base_url) {
    auto scheme_end = base_url.find("://");
    if (scheme_end == std::string::npos) fail(Errc::InvalidConfig, "base URL needs a scheme: " + base_url);
    auto path_start = base_url.find('/', scheme_end + 3);
    ParsedUrl url;
    url.scheme_host_port = base_url.substr(0, path_start);
    url.path_prefix = path_start == std::string::npos ? "" : base_url.substr(path_start);
    while (!url.path_prefix.empty() && url.path_prefix.back() == '/') url.path_prefix.pop_back();
    return url;
}

nlohmann::json post_json(const HttpEndpoint& endpoint, const std::string& route, const nlohmann::json& body,
                         double timeout_sec) {
    ParsedUrl url = parse_base_url(endpoint.base_url);
    httplib::Client client(url.scheme_host_port);
    auto seconds = static_cast<time_t>(timeout_sec);
    auto micros = static_cast<time_t>((timeout_sec - static_cast<double>(seconds)) * 1e6);
    client.set_connection_timeout(seconds, micros);
    client.set_read_timeout(seconds, micros);
    client.set_write_timeout(seconds, micros);
    httplib::Headers headers;
    if (!endpoint.api_key.empty()) headers.emplace("Authorization", "Bearer " + endpoint.api_key);

    auto started = std::chrono::steady_clock::now();
    auto result = client.Post(url.path_prefix + route, headers, body.dump(), "application/json");
    double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    if (!result) {
        auto error = result.error();
        if (error == httplib::Error::ConnectionTimeout ||
            (error == httplib::Error::Read && elapsed >= timeout_sec * 0.9)) {
            fail(Errc::Timeout, route + " after " + std::to_string(elapsed) + "s");
        }
        fail(Errc::BackendFailure, route + ": " + httplib::to_string(error));
    }
    if (result->status < 200 || result->status >= 300) {
        Error error(Errc::BackendFailure, route + ": HTTP " + std::to_string(result->status));
        if (result->has_header("Retry-After")) {
            try {
                error.retry_after_sec = std::stod(result->get_header_value("Retry-After"));
            } catch (const std::exception&) {
                // HTTP-date form is not interpreted
            }
        }
        throw error;
    }
    try {
        return nlohmann::json::parse(result->body);
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::BackendFailure, route + ": response is not JSON: " + e.what());
    }
}

}  // namespace

HttpChatBackend::HttpChatBackend(HttpEndpoint endpoint, std::map<PromptName, std::string> model_overrides,
                                 std::optional<double> temperature)
    : endpoint_(std::move(endpoint)), model_overrides_(std::move(model_overrides)), temperature_(temperature) {
    parse_base_url(endpoint_.base_url);
}

nlohmann::json HttpChatBackend::request_body(const GenerationRequest& request) const {
    auto override_model = model_overrides_.find(request.prompt);
    nlohmann::json body;
    body["model"] = override_model != model_overrides_.end() ? override_model->second : endpoint_.model;
    body["messages"] = nlohmann::json::array({{{"role", "user"}, {"content", request.rendered_prompt}}});
    if (temperature_) body["temperature"] = *temperature_;
    for (const auto& [key, value] : request.options) {
        // Numeric options (seed, max_tokens) go out as numbers.
        auto parsed = nlohmann::json::parse(value, nullptr, false);
        body[key] = !parsed.is_discarded() && parsed.is_number() ? parsed : nlohmann::json(value);
    }
    return body;
}

std::string HttpChatBackend::generate(const GenerationRequest& request) {
    double timeout = std::min(request.timeout_sec, endpoint_.timeout_sec);
    auto response = post_json(endpoint_, "/chat/completions", request_body(request), timeout);
    try {
        return response.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::BackendFailure, std::string("unexpected chat response shape: ") + e.what());
    }
}

HttpEmbedder::HttpEmbedder(HttpEndpoint endpoint, std::size_t dimension)
    : endpoint_(std::move(endpoint)), dimension_(dimension) {
    parse_base_url(endpoint_.base_url);
}

Vector HttpEmbedder::embed_raw(std::string_view text, const std::string&) {
    nlohmann::json body{{"model", endpoint_.model}, {"input", std::string(text)}};
    auto response = post_json(endpoint_, "/embeddings", body, endpoint_.timeout_sec);
    try {
        return response.at("data").at(0).at("embedding").get<Vector>();
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::BackendFailure, std::string("unexpected embedding response shape: ") + e.what());
    }
}

// ---- wrappers --------------------------------------------------------------

void Semaphore::acquire() {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [this] { return permits_ > 0; });
    --permits_;
}

void Semaphore::release() {
    {
        std::lock_guard lock(mutex_);
        ++permits_;
    }
    cv_.notify_one();
}

LimitedBackend::LimitedBackend(GenerationBackend& inner, std::size_t max_in_flight)
    : inner_(inner), permits_(std::max<std::size_t>(1, max_in_flight)) {}

std::string LimitedBackend::generate(const GenerationRequest& request) {
    permits_.acquire();
    struct Release {
        Semaphore& s;
        ~Release() { s.release(); }
    } release{permits_};
    return inner_.generate(request);
}

RecordingBackend::RecordingBackend(GenerationBackend& inner, UsageLedger& ledger) : inner_(inner), ledger_(ledger) {}

std::string RecordingBackend::generate(const GenerationRequest& request) {
    const std::uint64_t seq = ledger_.next_sequence("generation", request.thread);
    nlohmann::json line{{"type", "generation"},
                        {"thread", request.thread},
                        {"seq", seq},
                        {"prompt", to_string(request.prompt)},
                        {"promptTokens", default_token_estimate(request.rendered_prompt)}};
    if (ledger_.recording()) line["request"] = request.rendered_prompt;
    auto started = std::chrono::steady_clock::now();
    try {
        std::string response = inner_.generate(request);
        line["outputTokens"] = default_token_estimate(response);
        line["latencyMs"] = std::chrono::duration_cast<std::chrono::milliseconds>(
                                std::chrono::steady_clock::now() - started)
                                .count();
        if (ledger_.recording()) line["response"] = response;
        ledger_.append(line);
        return response;
    } catch (const Error& e) {
        line["error"] = to_string(e.code());
        line["message"] = e.what();
        ledger_.append(line);
        throw;
    }
}

RecordingEmbedder::RecordingEmbedder(Embedder& inner, UsageLedger& ledger) : inner_(inner), ledger_(ledger) {}

Vector RecordingEmbedder::embed_raw(std::string_view text, const std::string& thread) {
    const std::uint64_t seq = ledger_.next_sequence("embedding", thread);
    nlohmann::json line{{"type", "embedding"}, {"thread", thread}, {"seq", seq},
                        {"inputTokens", default_token_estimate(text)}};
    try {
        Vector vector = inner_.embed_raw(text, thread);
        if (ledger_.recording()) line["vector"] = vector;
        ledger_.append(line);
        return vector;
    } catch (const Error& e) {
        line["error"] = to_string(e.code());
        line["message"] = e.what();
        ledger_.append(line);
        throw;
    }
}

std::string ReplayBackend::generate(const GenerationRequest& request) {
    const std::uint64_t seq = log_->next_sequence("generation", request.thread);
    const nlohmann::json* entry = log_->find("generation", request.thread, seq);
    if (!entry) {
        fail(Errc::ScriptExhausted, "no recorded generation #" + std::to_string(seq) + " on " + request.thread);
    }
    if (entry->contains("error")) {
        fail(errc_from_string((*entry)["error"].get<std::string>()), entry->value("message", "recorded failure"));
    }
    if (!entry->contains("response")) fail(Errc::ScriptExhausted, "generation recorded without response text");
    return (*entry)["response"].get<std::string>();
}

Vector ReplayEmbedder::embed_raw(std::string_view, const std::string& thread) {
    const std::uint64_t seq = log_->next_sequence("embedding", thread);
    const nlohmann::json* entry = log_->find("embedding", thread, seq);
    if (!entry) fail(Errc::ScriptExhausted, "no recorded embedding #" + std::to_string(seq) + " on " + thread);
    if (entry->contains("error")) {
        fail(errc_from_string((*entry)["error"].get<std::string>()), entry->value("message", "recorded failure"));
    }
    if (!entry->contains("vector")) fail(Errc::ScriptExhausted, "embedding recorded without vector");
    return (*entry)["vector"].get<Vector>();
}

}  // namespace hcc
