#include "hcc/event_log.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include "hcc/error.hpp"
#include "hcc/text_util.hpp"

namespace hcc {

std::string_view to_string(Origin origin) noexcept {
    return origin == Origin::Environment ? "Environment" : "Agent";
}

std::string_view to_string(EventKind kind) noexcept {
    switch (kind) {
        case EventKind::TaskInit: return "TaskInit";
        case EventKind::PlanProposal: return "PlanProposal";
        case EventKind::CodePatch: return "CodePatch";
        case EventKind::TerminalOutput: return "TerminalOutput";
        case EventKind::ImprovementSketch: return "ImprovementSketch";
        case EventKind::SummaryNote: return "SummaryNote";
    }
    return "TaskInit";
}

std::string_view to_string(MetricDirection direction) noexcept {
    return direction == MetricDirection::HigherIsBetter ? "HigherIsBetter" : "LowerIsBetter";
}

Origin origin_from_string(std::string_view text) {
    if (text == "Environment") return Origin::Environment;
    if (text == "Agent") return Origin::Agent;
    fail(Errc::CorruptRun, "unknown origin '" + std::string(text) + "'");
}

EventKind kind_from_string(std::string_view text) {
    for (auto kind : {EventKind::TaskInit, EventKind::PlanProposal, EventKind::CodePatch, EventKind::TerminalOutput,
                      EventKind::ImprovementSketch, EventKind::SummaryNote}) {
        if (to_string(kind) == text) return kind;
    }
    fail(Errc::CorruptRun, "unknown event kind '" + std::string(text) + "'");
}

MetricDirection direction_from_string(std::string_view text) {
    if (text == "HigherIsBetter" || text == "higher" || text == "max") return MetricDirection::HigherIsBetter;
    if (text == "LowerIsBetter" || text == "lower" || text == "min") return MetricDirection::LowerIsBetter;
    fail(Errc::InvalidConfig, "unknown metric direction '" + std::string(text) + "'");
}

std::string ThreadTag::label() const {
    if (is_main()) return "main";
    return "p" + std::to_string(phase) + ".d" + std::to_string(direction) + ".s" + std::to_string(suggestion);
}

ThreadTag ThreadTag::parse(std::string_view label) {
    if (label == "main") return main();
    ThreadTag tag;
    if (std::sscanf(std::string(label).c_str(), "p%d.d%d.s%d", &tag.phase, &tag.direction, &tag.suggestion) != 3 ||
        tag.phase <= 0 || tag.direction <= 0 || tag.suggestion <= 0) {
        fail(Errc::CorruptRun, "malformed thread tag '" + std::string(label) + "'");
    }
    return tag;
}

std::size_t default_token_estimate(std::string_view text) {
    std::size_t code_points = 0;
    for (unsigned char c : text) {
        if ((c & 0xC0) != 0x80) ++code_points;
    }
    return (code_points + 3) / 4;
}

// ---- EventLog -------------------------------------------------------------

EventLog::EventLog(TokenCounter counter) : counter_(std::move(counter)) {}

Event EventLog::make(Origin origin, EventKind kind, std::string payload, ThreadTag thread) const {
    Event event;
    event.index = events_.size();
    event.origin = origin;
    event.kind = kind;
    event.token_estimate = counter_(payload);
    event.payload = std::move(payload);
    event.thread = thread;
    return event;
}

EventIndex EventLog::append(Event event) {
    if (event.index != events_.size()) {
        fail(Errc::IndexGap, "event index " + std::to_string(event.index) + " but log length is " +
                                 std::to_string(events_.size()));
    }
    if (event.index == 0) {
        if (event.kind != EventKind::TaskInit || event.origin != Origin::Environment || !event.thread.is_main())
            fail(Errc::PreconditionFailed, "index 0 must be an Environment TaskInit on Main");
    } else if (event.kind == EventKind::TaskInit) {
        fail(Errc::PreconditionFailed, "TaskInit may only appear at index 0");
    }
    if (event.kind == EventKind::PlanProposal && (event.origin != Origin::Agent || !event.thread.is_main()))
        fail(Errc::PreconditionFailed, "PlanProposal must be an Agent event on Main");

    auto last = last_origin_.find(event.thread);
    if (last != last_origin_.end() && last->second == event.origin) {
        fail(Errc::AlternationViolation, "two consecutive " + std::string(to_string(event.origin)) +
                                             " events on thread " + event.thread.label());
    }
    last_origin_[event.thread] = event.origin;
    token_prefix_.push_back(token_prefix_.back() + event.token_estimate);
    events_.push_back(std::move(event));
    return events_.size() - 1;
}

std::vector<Event> EventLog::slice(EventIndex i, EventIndex j) const {
    if (i > j || j >= events_.size()) {
        fail(Errc::OutOfRange, "slice [" + std::to_string(i) + ", " + std::to_string(j) + "] of log length " +
                                   std::to_string(events_.size()));
    }
    return {events_.begin() + static_cast<std::ptrdiff_t>(i), events_.begin() + static_cast<std::ptrdiff_t>(j) + 1};
}

const Event& EventLog::at(EventIndex index) const {
    if (index >= events_.size()) fail(Errc::OutOfRange, "event " + std::to_string(index));
    return events_[index];
}

void EventLog::mark_evicted(EventIndex index) {
    if (index >= events_.size()) fail(Errc::OutOfRange, "evict " + std::to_string(index));
    if (!evicted_.insert(index).second) fail(Errc::AlreadyEvicted, "event " + std::to_string(index));
}

std::size_t EventLog::prefix_tokens(EventIndex end) const {
    return token_prefix_[std::min(end, events_.size())];
}

// ---- PhaseLedger ----------------------------------------------------------

void PhaseLedger::mark(EventIndex index, const EventLog& log) {
    if (!boundaries_.empty() && index <= boundaries_.back()) {
        fail(Errc::NonMonotoneBoundary, "boundary " + std::to_string(index) + " after " +
                                            std::to_string(boundaries_.back()));
    }
    if (index > log.size()) fail(Errc::OutOfRange, "boundary " + std::to_string(index) + " beyond log end");
    if (!boundaries_.empty()) {
        bool has_trajectory = false;
        for (EventIndex k = boundaries_.back() + 1; k < index; ++k) {
            if (!log.at(k).thread.is_main()) {
                has_trajectory = true;
                break;
            }
        }
        if (!has_trajectory) fail(Errc::EmptyPhase, "no trajectory events before boundary " + std::to_string(index));
    }
    boundaries_.push_back(index);
}

std::optional<EventIndex> PhaseLedger::t0() const {
    if (boundaries_.empty()) return std::nullopt;
    return boundaries_.front();
}

int PhaseLedger::phase_at(EventIndex t) const {
    auto it = std::upper_bound(boundaries_.begin(), boundaries_.end(), t);
    return static_cast<int>(it - boundaries_.begin());
}

std::vector<EventIndex> PhaseLedger::boundaries_until(EventIndex t) const {
    auto it = std::upper_bound(boundaries_.begin(), boundaries_.end(), t);
    return {boundaries_.begin(), it};
}

PhaseLedger PhaseLedger::from_boundaries(std::vector<EventIndex> boundaries) {
    if (!std::is_sorted(boundaries.begin(), boundaries.end()) ||
        std::adjacent_find(boundaries.begin(), boundaries.end()) != boundaries.end()) {
        fail(Errc::NonMonotoneBoundary, "archived boundaries are not strictly increasing");
    }
    PhaseLedger ledger;
    ledger.boundaries_ = std::move(boundaries);
    return ledger;
}

// ---- solutions ------------------------------------------------------------

std::string code_of_patch(std::string_view payload) {
    auto blocks = text::fenced_blocks(payload);
    if (!blocks.empty()) return blocks.front().body;
    return std::string(payload);
}

std::optional<Solution> try_extract_solution(const EventLog& log, MetricDirection direction) {
    std::optional<Solution> best;
    std::map<ThreadTag, EventIndex> pending_patch;
    for (const Event& event : log.events()) {
        if (event.kind == EventKind::CodePatch) {
            pending_patch[event.thread] = event.index;
            continue;
        }
        if (event.kind != EventKind::TerminalOutput) continue;
        auto patch = pending_patch.find(event.thread);
        if (patch == pending_patch.end()) continue;
        EventIndex patch_index = patch->second;
        pending_patch.erase(patch);
        if (!event.metric || !event.submission_produced || !std::isfinite(*event.metric)) continue;

        double metric = *event.metric;
        bool better = !best;
        if (best) {
            bool strictly = direction == MetricDirection::HigherIsBetter ? metric > best->validation_metric
                                                                         : metric < best->validation_metric;
            // scanning in index order, so equality means a later patch
            better = strictly || metric == best->validation_metric;
        }
        if (better) {
            best = Solution{code_of_patch(log.at(patch_index).payload), metric, direction, true, patch_index};
        }
    }
    return best;
}

Solution extract_solution(const EventLog& log, MetricDirection direction) {
    auto solution = try_extract_solution(log, direction);
    if (!solution) fail(Errc::NoValidSolution, "no CodePatch has a validated run with a submission");
    return *solution;
}

// ---- persistence ----------------------------------------------------------

std::string format_timestamp(std::int64_t ms_since_epoch) {
    std::time_t seconds = static_cast<std::time_t>(ms_since_epoch / 1000);
    int millis = static_cast<int>(ms_since_epoch % 1000);
    if (millis < 0) {
        millis += 1000;
        --seconds;
    }
    std::tm tm{};
    gmtime_r(&seconds, &tm);
    char buffer[96];
    std::snprintf(buffer, sizeof buffer, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1,
                  tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, millis);
    return buffer;
}

std::int64_t parse_timestamp(std::string_view text) {
    std::tm tm{};
    int millis = 0;
    if (std::sscanf(std::string(text).c_str(), "%4d-%2d-%2dT%2d:%2d:%2d.%3dZ", &tm.tm_year, &tm.tm_mon, &tm.tm_mday,
                    &tm.tm_hour, &tm.tm_min, &tm.tm_sec, &millis) != 7) {
        fail(Errc::CorruptRun, "malformed timestamp '" + std::string(text) + "'");
    }
    tm.tm_year -= 1900;
    tm.tm_mon -= 1;
    return static_cast<std::int64_t>(timegm(&tm)) * 1000 + millis;
}

nlohmann::json to_json(const Event& event) { return nlohmann::json::parse(event_line(event)); }

Event event_from_json(const nlohmann::json& json) {
    try {
        Event event;
        event.index = json.at("index").get<EventIndex>();
        event.origin = origin_from_string(json.at("origin").get<std::string>());
        event.kind = kind_from_string(json.at("kind").get<std::string>());
        event.payload = json.at("payload").get<std::string>();
        event.thread = ThreadTag::parse(json.at("thread").get<std::string>());
        event.token_estimate = json.at("tokenEstimate").get<std::size_t>();
        event.wall_clock_ms = parse_timestamp(json.at("wallClock").get<std::string>());
        if (json.contains("metric") && !json.at("metric").is_null()) event.metric = json.at("metric").get<double>();
        event.submission_produced = json.value("submissionProduced", false);
        return event;
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::CorruptRun, std::string("malformed event: ") + e.what());
    }
}

std::string event_line(const Event& event) {
    // ordered_json keeps the documented field order on disk
    nlohmann::ordered_json json;
    json["index"] = event.index;
    json["origin"] = to_string(event.origin);
    json["kind"] = to_string(event.kind);
    json["payload"] = event.payload;
    json["thread"] = event.thread.label();
    json["tokenEstimate"] = event.token_estimate;
    json["wallClock"] = format_timestamp(event.wall_clock_ms);
    json["metric"] = event.metric ? nlohmann::ordered_json(*event.metric) : nlohmann::ordered_json(nullptr);
    json["submissionProduced"] = event.submission_produced;
    return json.dump();
}

void write_events_jsonl(const EventLog& log, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) fail(Errc::IoFailure, "cannot write " + path.string());
    for (const Event& event : log.events()) out << event_line(event) << '\n';
}

nlohmann::json to_json(const Sidecar& sidecar) {
    return nlohmann::json{{"evicted", sidecar.evicted}, {"boundaries", sidecar.boundaries}};
}

Sidecar sidecar_from(const EventLog& log, const PhaseLedger& ledger) {
    Sidecar sidecar;
    sidecar.evicted.assign(log.evicted().begin(), log.evicted().end());
    sidecar.boundaries.assign(ledger.boundaries().begin(), ledger.boundaries().end());
    return sidecar;
}

void write_sidecar(const Sidecar& sidecar, const std::filesystem::path& path) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc | std::ios::binary);
        if (!out) fail(Errc::IoFailure, "cannot write " + tmp.string());
        out << to_json(sidecar).dump() << '\n';
    }
    std::filesystem::rename(tmp, path);
}

Sidecar read_sidecar(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::CorruptRun, "missing " + path.string());
    try {
        auto json = nlohmann::json::parse(in);
        Sidecar sidecar;
        sidecar.evicted = json.at("evicted").get<std::vector<EventIndex>>();
        sidecar.boundaries = json.at("boundaries").get<std::vector<EventIndex>>();
        return sidecar;
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::CorruptRun, path.string() + ": " + e.what());
    }
}

EventLog read_events_jsonl(const std::filesystem::path& path, const Sidecar* sidecar) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::CorruptRun, "missing " + path.string());
    EventLog log;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty()) continue;
        nlohmann::json json;
        try {
            json = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception&) {
            fail(Errc::CorruptRun, path.string() + ":" + std::to_string(line_number) + ": not JSON");
        }
        try {
            log.append(event_from_json(json));
        } catch (const Error& e) {
            if (e.code() == Errc::CorruptRun) throw;
            fail(Errc::CorruptRun, path.string() + ":" + std::to_string(line_number) + ": " + e.what());
        }
    }
    if (sidecar) {
        for (EventIndex index : sidecar->evicted) {
            if (index >= log.size()) fail(Errc::CorruptRun, "evicted marker beyond log end");
            log.mark_evicted(index);
        }
    }
    return log;
}

}  // namespace hcc
