#pragma once

// Text-generation and embedding backends behind one interface each:
// scripted and hashing mocks for offline runs, chat-completions / embeddings
// over HTTP, concurrency limiting, and record / replay adapters.

#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "hcc/prompts.hpp"
#include "hcc/recording.hpp"
#include "hcc/wisdom_store.hpp"

namespace hcc {

struct GenerationRequest {
    PromptName prompt = PromptName::Draft;
    std::string rendered_prompt;
    /// Thread label of the caller ("main", "p1.d2.s1"); keys recording and scripting.
    std::string thread = "main";
    double timeout_sec = 600.0;
    std::map<std::string, std::string> options;
};

class GenerationBackend {
public:
    virtual ~GenerationBackend() = default;
    /// Throws Timeout, BackendFailure, ScriptExhausted.
    virtual std::string generate(const GenerationRequest& request) = 0;
};

/// Validates the request, then forwards. Throws PreconditionFailed on an
/// empty prompt.
std::string generate(GenerationBackend& backend, const GenerationRequest& request);

class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::size_t dimension() const = 0;
    /// Unnormalized vector as the backend produced it.
    virtual Vector embed_raw(std::string_view text, const std::string& thread) = 0;
};

/// Unit-norm E(text). Throws PreconditionFailed (empty text), DimensionDrift,
/// BackendFailure.
Vector embed(Embedder& embedder, std::string_view text, const std::string& thread = "main");

// ---- scripted generation -------------------------------------------------

struct ScriptRule {
    enum class Inject { None, Timeout, Failure };

    std::optional<PromptName> prompt;
    /// Exact thread label, or a prefix ending in '*'.
    std::optional<std::string> thread;
    /// Substring the rendered prompt must contain.
    std::optional<std::string> contains;
    std::string response;
    bool echo = false;
    bool repeat = false;
    Inject inject = Inject::None;

    bool matches(const GenerationRequest& request) const;
};

/// Canned responses matched against (prompt name, thread, content). Matching
/// is serialized; non-repeat rules are consumed. In strict mode only the
/// first unconsumed rule may match.
class ScriptedBackend : public GenerationBackend {
public:
    explicit ScriptedBackend(std::vector<ScriptRule> rules = {}, bool strict = false);

    /// {"strict": bool, "rules": [{"prompt", "thread", "contains", "response",
    /// "echo", "repeat", "inject": "timeout"|"failure"}]}
    static std::unique_ptr<ScriptedBackend> from_json(const nlohmann::json& script);
    static std::unique_ptr<ScriptedBackend> load(const std::filesystem::path& path);

    void add(ScriptRule rule);
    std::size_t remaining() const;
    std::size_t calls() const;

    std::string generate(const GenerationRequest& request) override;

private:
    struct Slot {
        ScriptRule rule;
        bool consumed = false;
    };
    mutable std::mutex mutex_;
    std::vector<Slot> slots_;
    bool strict_;
    std::size_t calls_ = 0;
};

// ---- hashing embedder ----------------------------------------------------

/// Deterministic mock E(·): each lower-cased word maps to a seeded Gaussian
/// direction; a text embeds to the sum of its word directions. Texts sharing
/// vocabulary have high cosine similarity.
class HashingEmbedder : public Embedder {
public:
    explicit HashingEmbedder(std::size_t dimension = 64, std::uint64_t seed = 0);

    std::size_t dimension() const override { return dimension_; }
    Vector embed_raw(std::string_view text, const std::string& thread) override;

private:
    std::size_t dimension_;
    std::uint64_t seed_;
};

// ---- HTTP ----------------------------------------------------------------

struct HttpEndpoint {
    /// e.g. "http://localhost:8000/v1"
    std::string base_url;
    std::string model;
    std::string api_key;
    double timeout_sec = 600.0;
};

/// POST {base}/chat/completions with a single user message.
/// 429 and 5xx map to BackendFailure (retry_after_sec set from Retry-After).
class HttpChatBackend : public GenerationBackend {
public:
    HttpChatBackend(HttpEndpoint endpoint, std::map<PromptName, std::string> model_overrides = {},
                    std::optional<double> temperature = std::nullopt);

    std::string generate(const GenerationRequest& request) override;

    /// Request body for a given request (exposed for contract tests).
    nlohmann::json request_body(const GenerationRequest& request) const;

private:
    HttpEndpoint endpoint_;
    std::map<PromptName, std::string> model_overrides_;
    std::optional<double> temperature_;
};

/// POST {base}/embeddings {"model", "input"} -> data[0].embedding.
class HttpEmbedder : public Embedder {
public:
    HttpEmbedder(HttpEndpoint endpoint, std::size_t dimension);

    std::size_t dimension() const override { return dimension_; }
    Vector embed_raw(std::string_view text, const std::string& thread) override;

private:
    HttpEndpoint endpoint_;
    std::size_t dimension_;
};

// ---- wrappers ------------------------------------------------------------

class Semaphore {
public:
    explicit Semaphore(std::size_t permits) : permits_(permits) {}
    void acquire();
    void release();

private:
    std::mutex mutex_;
    std::condition_variable cv_;
    std::size_t permits_;
};

/// Caps in-flight requests.
class LimitedBackend : public GenerationBackend {
public:
    LimitedBackend(GenerationBackend& inner, std::size_t max_in_flight);
    std::string generate(const GenerationRequest& request) override;

private:
    GenerationBackend& inner_;
    Semaphore permits_;
};

/// Appends one usage line per call; in record mode also the request and
/// response text (or the error) for replay.
class RecordingBackend : public GenerationBackend {
public:
    RecordingBackend(GenerationBackend& inner, UsageLedger& ledger);
    std::string generate(const GenerationRequest& request) override;

private:
    GenerationBackend& inner_;
    UsageLedger& ledger_;
};

class RecordingEmbedder : public Embedder {
public:
    RecordingEmbedder(Embedder& inner, UsageLedger& ledger);
    std::size_t dimension() const override { return inner_.dimension(); }
    Vector embed_raw(std::string_view text, const std::string& thread) override;

private:
    Embedder& inner_;
    UsageLedger& ledger_;
};

/// Serves recorded responses by (thread, per-thread sequence). Missing
/// entries raise ScriptExhausted; recorded errors are re-raised.
class ReplayBackend : public GenerationBackend {
public:
    explicit ReplayBackend(std::shared_ptr<ReplayLog> log) : log_(std::move(log)) {}
    std::string generate(const GenerationRequest& request) override;

private:
    std::shared_ptr<ReplayLog> log_;
};

class ReplayEmbedder : public Embedder {
public:
    ReplayEmbedder(std::shared_ptr<ReplayLog> log, std::size_t dimension) : log_(std::move(log)), dimension_(dimension) {}
    std::size_t dimension() const override { return dimension_; }
    Vector embed_raw(std::string_view text, const std::string& thread) override;

private:
    std::shared_ptr<ReplayLog> log_;
    std::size_t dimension_;
};

}  // namespace hcc
