#include "hcc/trace.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "hcc/cache_hierarchy.hpp"
#include "hcc/error.hpp"

namespace hcc {

namespace fs = std::filesystem;

std::vector<TraceRow> compute_trace(const EventLog& archive, std::span<const EventIndex> boundaries,
                                    std::span<const PromotionRecord> promotions) {
    std::vector<PromotionRecord> pending(promotions.begin(), promotions.end());
    std::sort(pending.begin(), pending.end(),
              [](const PromotionRecord& a, const PromotionRecord& b) { return a.unit.range_end < b.unit.range_end; });
    const PhaseLedger ledger = PhaseLedger::from_boundaries({boundaries.begin(), boundaries.end()});

    // State as it stood at each step: the log grows event by event and a
    // promotion applies only once its boundary is reached.
    EventLog state([&archive](std::string_view text) { return archive.count_tokens(text); });
    L2Store l2;
    std::size_t next_promotion = 0;
    std::vector<TraceRow> rows;
    const auto events = archive.events();
    for (EventIndex t = 0; t < events.size(); ++t) {
        while (next_promotion < pending.size() && pending[next_promotion].unit.range_end + 1 <= t) {
            const auto& record = pending[next_promotion++];
            if (record.unit.range_end >= state.size())
                fail(Errc::CorruptRun, "promotion of phase " + std::to_string(record.phase) + " beyond log end");
            l2.add(record.unit);
            for (EventIndex k : record.evicted) state.mark_evicted(k);
        }
        if (t >= 1 && events[t].origin == Origin::Agent) {
            TraceRow row;
            row.step = t;
            row.phase = ledger.phase_at(t);
            row.kind = events[t].kind;
            row.naive_tokens = state.prefix_tokens(t);
            row.hcc_tokens = build_context(state, ledger, l2, t).total_tokens;
            rows.push_back(row);
        }
        Event copy = events[t];
        state.append(std::move(copy));
    }
    return rows;
}

TraceSummary summarize(std::span<const TraceRow> rows) {
    TraceSummary summary;
    summary.rows = rows.size();
    for (const auto& row : rows) {
        summary.naive_peak = std::max(summary.naive_peak, row.naive_tokens);
        summary.hcc_peak = std::max(summary.hcc_peak, row.hcc_tokens);
    }
    if (summary.naive_peak > 0)
        summary.ratio = static_cast<double>(summary.hcc_peak) / static_cast<double>(summary.naive_peak);
    return summary;
}

std::string trace_csv(std::span<const TraceRow> rows) {
    std::ostringstream out;
    out << "step,phase,kind,naive_tokens,hcc_tokens\n";
    for (const auto& row : rows)
        out << row.step << ',' << row.phase << ',' << to_string(row.kind) << ',' << row.naive_tokens << ','
            << row.hcc_tokens << '\n';
    return out.str();
}

void write_trace_csv(std::span<const TraceRow> rows, const fs::path& path) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << trace_csv(rows);
        if (!out) fail(Errc::IoFailure, "cannot write " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) fail(Errc::IoFailure, "cannot replace " + path.string() + ": " + ec.message());
}

std::vector<PromotionRecord> read_promotions(const fs::path& path) {
    std::vector<PromotionRecord> records;
    std::ifstream in(path, std::ios::binary);
    if (!in) return records;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty()) continue;
        try {
            records.push_back(promotion_record_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception&) {
            fail(Errc::CorruptRun, path.string() + ":" + std::to_string(line_number) + ": not JSON");
        }
    }
    return records;
}

TraceSummary trace_run_directory(const fs::path& run_dir) {
    const fs::path events_path = run_dir / "events.jsonl";
    if (!fs::exists(events_path)) fail(Errc::CorruptRun, "no events.jsonl in " + run_dir.string());
    Sidecar sidecar;
    if (fs::exists(run_dir / "sidecar.json")) sidecar = read_sidecar(run_dir / "sidecar.json");
    EventLog archive = read_events_jsonl(events_path);
    const auto promotions = read_promotions(run_dir / "promotions.jsonl");

    std::vector<EventIndex> evicted_by_promotions;
    for (const auto& record : promotions)
        evicted_by_promotions.insert(evicted_by_promotions.end(), record.evicted.begin(), record.evicted.end());
    std::sort(evicted_by_promotions.begin(), evicted_by_promotions.end());
    if (evicted_by_promotions != sidecar.evicted)
        fail(Errc::CorruptRun, "sidecar eviction markers disagree with promotions.jsonl");

    std::vector<TraceRow> rows;
    try {
        rows = compute_trace(archive, sidecar.boundaries, promotions);
    } catch (const Error& e) {
        if (e.code() == Errc::CorruptRun) throw;
        fail(Errc::CorruptRun, std::string("inconsistent run archive: ") + e.what());
    }
    write_trace_csv(rows, run_dir / "trace.csv");
    return summarize(rows);
}

}  // namespace hcc
