#pragma once

// Append-only interaction record E_t plus phase-boundary bookkeeping and
// solution extraction h(E).

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace hcc {

using EventIndex = std::size_t;

enum class Origin { Environment, Agent };

enum class EventKind { TaskInit, PlanProposal, CodePatch, TerminalOutput, ImprovementSketch, SummaryNote };

enum class MetricDirection { HigherIsBetter, LowerIsBetter };

std::string_view to_string(Origin origin) noexcept;
std::string_view to_string(EventKind kind) noexcept;
std::string_view to_string(MetricDirection direction) noexcept;
Origin origin_from_string(std::string_view text);
EventKind kind_from_string(std::string_view text);
MetricDirection direction_from_string(std::string_view text);

/// Logical thread an event belongs to: Main, or the trajectory spawned by
/// suggestion `suggestion` of direction `direction` in phase `phase`.
/// Alternation of origins is enforced per thread.
struct ThreadTag {
    int phase = 0;
    int direction = 0;
    int suggestion = 0;

    static ThreadTag main() { return {}; }
    static ThreadTag trajectory(int p, int i, int j) { return {p, i, j}; }

    bool is_main() const { return phase == 0; }
    /// "main" or "p{phase}.d{direction}.s{suggestion}".
    std::string label() const;
    static ThreadTag parse(std::string_view label);

    auto operator<=>(const ThreadTag&) const = default;
};

using TokenCounter = std::function<std::size_t(std::string_view)>;

/// ceil(code points / 4).
std::size_t default_token_estimate(std::string_view text);

struct Event {
    EventIndex index = 0;
    Origin origin = Origin::Environment;
    EventKind kind = EventKind::TaskInit;
    std::string payload;
    ThreadTag thread;
    std::size_t token_estimate = 0;
    std::int64_t wall_clock_ms = 0;
    std::optional<double> metric;
    bool submission_produced = false;

    bool operator==(const Event&) const = default;
};

class EventLog {
public:
    explicit EventLog(TokenCounter counter = default_token_estimate);

    /// Builds an event positioned at the current end of the log with its
    /// token estimate cached. Does not append.
    Event make(Origin origin, EventKind kind, std::string payload, ThreadTag thread = ThreadTag::main()) const;

    /// Throws IndexGap, AlternationViolation, PreconditionFailed.
    EventIndex append(Event event);

    /// E_{i:j}, inclusive, evicted events included.
    std::vector<Event> slice(EventIndex i, EventIndex j) const;

    const Event& at(EventIndex index) const;
    std::size_t size() const noexcept { return events_.size(); }
    bool empty() const noexcept { return events_.empty(); }
    std::span<const Event> events() const noexcept { return events_; }

    void mark_evicted(EventIndex index);
    bool is_evicted(EventIndex index) const { return evicted_.contains(index); }
    const std::set<EventIndex>& evicted() const noexcept { return evicted_; }

    std::size_t count_tokens(std::string_view text) const { return counter_(text); }

    /// Sum of token estimates of events [0, end).
    std::size_t prefix_tokens(EventIndex end) const;

private:
    std::vector<Event> events_;
    std::set<EventIndex> evicted_;
    std::map<ThreadTag, Origin> last_origin_;
    std::vector<std::size_t> token_prefix_{0};
    TokenCounter counter_;
};

/// Phase boundaries T_p = {t_0, ..., t_p}. Each boundary is the index of the
/// PlanProposal event opening the next phase (that event may not exist yet
/// when the run stops right after a phase).
class PhaseLedger {
public:
    /// Throws NonMonotoneBoundary, OutOfRange, EmptyPhase.
    void mark(EventIndex index, const EventLog& log);

    std::span<const EventIndex> boundaries() const noexcept { return boundaries_; }
    bool empty() const noexcept { return boundaries_.empty(); }
    std::optional<EventIndex> t0() const;
    std::size_t completed_phases() const noexcept { return boundaries_.empty() ? 0 : boundaries_.size() - 1; }

    /// 0 before t_0; otherwise p such that t_{p-1} <= t < t_p (open-ended after the last boundary).
    int phase_at(EventIndex t) const;

    /// Boundaries <= t, i.e. the ledger as it stood at time t.
    std::vector<EventIndex> boundaries_until(EventIndex t) const;

    /// Rebuilds without the content checks (archives, sidecars).
    static PhaseLedger from_boundaries(std::vector<EventIndex> boundaries);

private:
    std::vector<EventIndex> boundaries_;
};

struct Solution {
    std::string code;
    double validation_metric = 0.0;
    MetricDirection metric_direction = MetricDirection::HigherIsBetter;
    bool submission_produced = false;
    EventIndex source_event_index = 0;
};

/// Pulls the code out of a CodePatch payload; an unfenced payload is taken as code.
std::string code_of_patch(std::string_view payload);

/// Best validated solution: argbest metric, latest CodePatch wins ties.
/// Throws NoValidSolution.
Solution extract_solution(const EventLog& log, MetricDirection direction);
std::optional<Solution> try_extract_solution(const EventLog& log, MetricDirection direction);

// ---- persistence ---------------------------------------------------------

std::string format_timestamp(std::int64_t ms_since_epoch);
std::int64_t parse_timestamp(std::string_view text);

nlohmann::json to_json(const Event& event);
Event event_from_json(const nlohmann::json& json);

/// One event per line, fields: index, origin, kind, payload, thread,
/// tokenEstimate, wallClock, metric, submissionProduced.
std::string event_line(const Event& event);
void write_events_jsonl(const EventLog& log, const std::filesystem::path& path);

struct Sidecar {
    std::vector<EventIndex> evicted;
    std::vector<EventIndex> boundaries;
};

nlohmann::json to_json(const Sidecar& sidecar);
Sidecar sidecar_from(const EventLog& log, const PhaseLedger& ledger);
void write_sidecar(const Sidecar& sidecar, const std::filesystem::path& path);
Sidecar read_sidecar(const std::filesystem::path& path);

/// Loads an archived log (events.jsonl) and applies sidecar eviction markers.
/// Throws CorruptRun on malformed lines.
EventLog read_events_jsonl(const std::filesystem::path& path, const Sidecar* sidecar = nullptr);

}  // namespace hcc
