#pragma once

// Consolidation operators: task descriptor d_τ, phase promotion P1
// (trajectories -> κ with L1 eviction) and task promotion P2 (history ->
// wisdom).

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "hcc/cache_hierarchy.hpp"
#include "hcc/event_log.hpp"
#include "hcc/llm_gateway.hpp"
#include "hcc/structured_output.hpp"
#include "hcc/wisdom_store.hpp"

namespace hcc {

struct MigrationOptions {
    /// Total attempts per prompt when the output breaks its format contract.
    std::size_t format_attempts = 2;
    /// Token cap applied to each event payload passed to P1 / P2.
    std::size_t per_event_cap = 4000;
    double timeout_sec = 600.0;
    std::size_t descriptor_max_tokens = 250;
};

/// Why a descriptor breaks the single-paragraph contract, or nullopt when it
/// is acceptable. Soft line wraps are allowed; blank lines, list items,
/// headings, backticks and fences are not.
std::optional<std::string> descriptor_violation(std::string_view text, std::size_t max_tokens);

/// d_τ. Regenerates with the same prompt on a format violation.
/// Throws PreconditionFailed, FormatViolation, BackendFailure, Timeout.
std::string generate_descriptor(std::string_view task_description, GenerationBackend& gen,
                                const MigrationOptions& options = {});

enum class TrajectoryOutcome { Improved, NoImprovement, Failed };

std::string_view to_string(TrajectoryOutcome outcome) noexcept;

/// σ_{p,i,j}: the contiguous run [start, end] of one suggestion's events in
/// the merged log. Directions and suggestions are 1-based.
struct Trajectory {
    int phase = 0;
    int direction = 0;
    int suggestion = 0;
    EventIndex start = 0;
    EventIndex end = 0;
    TrajectoryOutcome outcome = TrajectoryOutcome::Failed;
    std::optional<double> best_metric;

    ThreadTag thread() const { return ThreadTag::trajectory(phase, direction, suggestion); }
};

struct PhasePlan {
    int phase = 0;
    EventIndex plan_event_index = 0;
    ResearchPlan plan;
};

struct PromotionRecord {
    int phase = 0;
    std::vector<EventIndex> evicted;
    KnowledgeUnit unit;
    std::size_t prompt_tokens = 0;
    std::size_t output_tokens = 0;
};

nlohmann::json to_json(const PromotionRecord& record);
PromotionRecord promotion_record_from_json(const nlohmann::json& json);

/// Prior research plans with their κ summaries, oldest first; the "memory"
/// binding of the plan and P1 prompts.
std::string render_memory(const EventLog& log, const L2Store& l2);

/// Renders trajectory events for P1, each payload capped at `per_event_cap`.
std::string render_trajectories(const EventLog& log, const PhasePlan& plan, std::span<const Trajectory> trajectories,
                                std::size_t per_event_cap);

/// κ_p = P1({σ_{p,i,j}}). Summarizes first; only after a usable summary is
/// κ_p added to L2 and every trajectory index marked evicted. On any error
/// the log and L2 are untouched. κ_p covers (plan index, last event].
/// Throws AlreadyPromoted, PreconditionFailed, FormatViolation, BackendFailure, Timeout.
PromotionRecord promote_phase(const PhasePlan& plan, std::span<const Trajectory> trajectories,
                              std::string_view task_description, EventLog& log, L2Store& l2, GenerationBackend& gen,
                              const MigrationOptions& options = {});

/// Index union of the trajectory ranges, ascending.
std::vector<EventIndex> trajectory_indices(std::span<const Trajectory> trajectories);

/// True when both "DATA SUMMARY:" and "MODEL SUMMARY:" appear, in that order.
bool has_wisdom_sections(std::string_view text);

struct TaskPromotion {
    std::optional<WisdomEntry> entry;
    /// Set when insertion was skipped.
    std::optional<std::string> warning;
};

/// w_τ = P2(d_τ, L1, L2, h(E)); embeds d_τ and inserts (h_τ, w_τ). A format
/// violation after all attempts skips insertion with a warning. Never
/// touches the log or L2.
/// Throws BackendFailure, Timeout, DimensionDrift.
TaskPromotion promote_task(std::string_view descriptor, std::string_view task_id, std::string_view task_description,
                           const EventLog& log, const PhaseLedger& ledger, const L2Store& l2,
                           const std::optional<Solution>& solution, GenerationBackend& gen, Embedder& embedder,
                           WisdomRepository& store, const MigrationOptions& options = {},
                           OverwritePolicy policy = OverwritePolicy::Replace);

}  // namespace hcc
