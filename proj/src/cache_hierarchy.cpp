#include "hcc/cache_hierarchy.hpp"

#include <algorithm>

#include "hcc/error.hpp"

namespace hcc {

bool L1View::contains(EventIndex k) const {
    auto in = [k](const std::vector<EventIndex>& set) { return std::binary_search(set.begin(), set.end(), k); };
    return in(bootstrap) || in(plans) || in(active);
}

std::vector<EventIndex> L1View::all() const {
    std::vector<EventIndex> merged;
    merged.reserve(size());
    merged.insert(merged.end(), bootstrap.begin(), bootstrap.end());
    merged.insert(merged.end(), plans.begin(), plans.end());
    merged.insert(merged.end(), active.begin(), active.end());
    std::sort(merged.begin(), merged.end());
    return merged;
}

void L2Store::add(KnowledgeUnit unit) {
    if (has_phase(unit.phase)) fail(Errc::AlreadyPromoted, "phase " + std::to_string(unit.phase));
    if (unit.text.empty()) fail(Errc::PreconditionFailed, "empty knowledge unit");
    if (unit.range_start > unit.range_end) fail(Errc::PreconditionFailed, "inverted knowledge range");
    if (!units_.empty()) {
        const auto& last = units_.back();
        if (unit.phase <= last.phase || unit.range_start <= last.range_end)
            fail(Errc::PreconditionFailed, "knowledge units must be added in phase order with disjoint ranges");
    }
    units_.push_back(std::move(unit));
}

bool L2Store::has_phase(int phase) const { return find_phase(phase) != nullptr; }

const KnowledgeUnit* L2Store::find_phase(int phase) const {
    for (const auto& unit : units_)
        if (unit.phase == phase) return &unit;
    return nullptr;
}

const KnowledgeUnit* L2Store::anchored_at(EventIndex k) const {
    auto it = std::lower_bound(units_.begin(), units_.end(), k,
                               [](const KnowledgeUnit& unit, EventIndex key) { return unit.range_start < key; });
    if (it != units_.end() && it->range_start == k) return &*it;
    return nullptr;
}

L1View l1_view(const EventLog& log, const PhaseLedger& ledger, EventIndex t) {
    L1View view;
    if (log.empty()) return view;
    const EventIndex last_event = std::min<EventIndex>(t, log.size() - 1);
    auto boundaries = ledger.boundaries_until(t);
    if (boundaries.empty()) {
        // bootstrap still running: the whole prefix is working memory
        for (EventIndex k = 0; k <= last_event; ++k) view.bootstrap.push_back(k);
        return view;
    }
    const EventIndex t0 = boundaries.front();
    for (EventIndex k = 0; k < t0 && k < log.size(); ++k) view.bootstrap.push_back(k);
    for (EventIndex b : boundaries)
        if (b < log.size()) view.plans.push_back(b);
    const EventIndex open = boundaries.back();
    for (EventIndex k = open + 1; k <= last_event; ++k)
        if (!log.is_evicted(k)) view.active.push_back(k);
    return view;
}

Hit hit(EventIndex k, EventIndex t, const L1View& l1, const L2Store& l2, const EventLog& log) {
    (void)t;
    if (l1.contains(k)) return {Hit::Kind::Raw, &log.at(k), nullptr};
    if (const KnowledgeUnit* unit = l2.anchored_at(k)) return {Hit::Kind::Summary, nullptr, unit};
    return {};
}

std::string ContextView::render() const {
    std::string out;
    for (std::size_t i = 0; i < segments.size(); ++i) {
        if (i) out += "\n\n";
        out += segments[i].text;
    }
    return out;
}

Segment raw_segment(const Event& event) {
    return {SegmentSource::RawEvent, event.index, "[" + std::string(to_string(event.origin)) + "] " + event.payload,
            event.token_estimate};
}

Segment summary_segment(const KnowledgeUnit& unit) {
    return {SegmentSource::Summary, static_cast<std::size_t>(unit.phase),
            "[PHASE " + std::to_string(unit.phase) + " SUMMARY] " + unit.text, unit.token_estimate};
}

ContextView build_context(const EventLog& log, const PhaseLedger& ledger, const L2Store& l2, EventIndex t) {
    if (t < 1) fail(Errc::PreconditionFailed, "build_context needs t >= 1");
    if (t > log.size()) fail(Errc::OutOfRange, "context at t=" + std::to_string(t) + " beyond log end");
    ContextView view;
    const L1View l1 = l1_view(log, ledger, t);
    for (EventIndex k = 0; k < t; ++k) {
        Hit h = hit(k, t, l1, l2, log);
        if (h.kind == Hit::Kind::Skip) continue;
        Segment segment = h.kind == Hit::Kind::Raw ? raw_segment(*h.event) : summary_segment(*h.unit);
        view.total_tokens += segment.tokens;
        view.segments.push_back(std::move(segment));
    }
    return view;
}

ContextView extend_context(ContextView base, std::span<const Event> own_events) {
    for (const Event& event : own_events) {
        Segment segment = raw_segment(event);
        base.total_tokens += segment.tokens;
        base.segments.push_back(std::move(segment));
    }
    return base;
}

}  // namespace hcc
