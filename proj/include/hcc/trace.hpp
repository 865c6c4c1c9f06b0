#pragma once

// Context-length trace: for every agent action, the token size of the naive
// full-history context against the HCC context, recomputed from a run
// archive by replaying boundary and promotion state as of each step.

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "hcc/event_log.hpp"
#include "hcc/migration.hpp"

namespace hcc {

struct TraceRow {
    EventIndex step = 0;
    int phase = 0;
    EventKind kind = EventKind::CodePatch;
    std::size_t naive_tokens = 0;
    std::size_t hcc_tokens = 0;

    bool operator==(const TraceRow&) const = default;
};

/// One row per Agent-origin event t, measuring C_{t-1}. `archive` is read for
/// payloads only; its eviction markers are ignored. A promotion takes effect
/// once the log has reached its boundary (the unit's range end + 1).
std::vector<TraceRow> compute_trace(const EventLog& archive, std::span<const EventIndex> boundaries,
                                    std::span<const PromotionRecord> promotions);

struct TraceSummary {
    std::size_t rows = 0;
    std::size_t naive_peak = 0;
    std::size_t hcc_peak = 0;
    /// hcc_peak / naive_peak; 1.0 for an empty trace.
    double ratio = 1.0;
};

TraceSummary summarize(std::span<const TraceRow> rows);

/// Header "step,phase,kind,naive_tokens,hcc_tokens".
std::string trace_csv(std::span<const TraceRow> rows);
void write_trace_csv(std::span<const TraceRow> rows, const std::filesystem::path& path);

std::vector<PromotionRecord> read_promotions(const std::filesystem::path& path);

/// Recomputes the trace of a run directory and rewrites its trace.csv.
/// Throws CorruptRun.
TraceSummary trace_run_directory(const std::filesystem::path& run_dir);

}  // namespace hcc
