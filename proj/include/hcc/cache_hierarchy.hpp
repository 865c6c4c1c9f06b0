#pragma once

// L1 / L2 membership views and the hit policy that builds the model context.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hcc/event_log.hpp"

namespace hcc {

/// L1(t) = E_{t_0-1} ∪ P_{p-1} ∪ E_{t_{p-1}+1 : t}. Indices are ascending.
struct L1View {
    std::vector<EventIndex> bootstrap;
    std::vector<EventIndex> plans;
    std::vector<EventIndex> active;

    bool contains(EventIndex k) const;
    std::size_t size() const { return bootstrap.size() + plans.size() + active.size(); }
    std::vector<EventIndex> all() const;
};

/// κ_p: summary of phase p replacing its raw trajectories. The covered range
/// is the open interval between the phase's two boundaries.
struct KnowledgeUnit {
    int phase = 0;
    EventIndex range_start = 0;
    EventIndex range_end = 0;
    std::string text;
    std::size_t token_estimate = 0;

    bool operator==(const KnowledgeUnit&) const = default;
};

class L2Store {
public:
    /// Throws AlreadyPromoted when the phase already has a unit, PreconditionFailed
    /// when ordering or disjointness would break.
    void add(KnowledgeUnit unit);

    std::span<const KnowledgeUnit> units() const noexcept { return units_; }
    bool empty() const noexcept { return units_.empty(); }
    std::size_t size() const noexcept { return units_.size(); }
    bool has_phase(int phase) const;
    const KnowledgeUnit* find_phase(int phase) const;
    /// Unit whose range starts at k, if any.
    const KnowledgeUnit* anchored_at(EventIndex k) const;

private:
    std::vector<KnowledgeUnit> units_;
};

L1View l1_view(const EventLog& log, const PhaseLedger& ledger, EventIndex t);

struct Hit {
    enum class Kind { Raw, Summary, Skip };
    Kind kind = Kind::Skip;
    const Event* event = nullptr;
    const KnowledgeUnit* unit = nullptr;
};

/// Ψ_t(k).
Hit hit(EventIndex k, EventIndex t, const L1View& l1, const L2Store& l2, const EventLog& log);

enum class SegmentSource { RawEvent, Summary };

struct Segment {
    SegmentSource source = SegmentSource::RawEvent;
    /// Event index for raw segments, phase number for summaries.
    std::size_t ref = 0;
    std::string text;
    std::size_t tokens = 0;

    bool operator==(const Segment&) const = default;
};

struct ContextView {
    std::vector<Segment> segments;
    std::size_t total_tokens = 0;

    /// Raw: "[{origin}] {payload}", summary: "[PHASE {p} SUMMARY] {text}",
    /// joined by blank lines.
    std::string render() const;

    bool operator==(const ContextView&) const = default;
};

Segment raw_segment(const Event& event);
Segment summary_segment(const KnowledgeUnit& unit);

/// C_{t-1} = concat{Ψ_t(k)}_{k=0}^{t-1}.
ContextView build_context(const EventLog& log, const PhaseLedger& ledger, const L2Store& l2, EventIndex t);

/// A trajectory's working context: the shared phase-start view followed by
/// the trajectory's own raw events.
ContextView extend_context(ContextView base, std::span<const Event> own_events);

}  // namespace hcc
