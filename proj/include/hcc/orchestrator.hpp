#pragma once

// The agent loop: prefetch-seeded bootstrap, research-plan proposal,
// parallel trajectory execution with debug loops, phase promotion, and
// task-level finalization.

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hcc/cache_hierarchy.hpp"
#include "hcc/config.hpp"
#include "hcc/event_log.hpp"
#include "hcc/llm_gateway.hpp"
#include "hcc/migration.hpp"
#include "hcc/recording.hpp"
#include "hcc/sandbox.hpp"
#include "hcc/structured_output.hpp"
#include "hcc/trace.hpp"
#include "hcc/wisdom_store.hpp"

namespace hcc {

struct TaskSpec {
    std::string task_id;
    std::string description;
    std::filesystem::path data_dir;
    std::string data_preview;
    std::string user_instructions;
    MetricDirection metric_direction = MetricDirection::HigherIsBetter;
};

/// Task directory: description.md, data/, optional preview.md and
/// instructions.md; taskId is the directory name. Config supplies the metric
/// direction and instructions when the directory has none. Throws IoFailure.
TaskSpec load_task(const std::filesystem::path& task_dir, const Config& config);

nlohmann::json to_json(const TaskSpec& task);

/// Wall clock for event stamps and the budget. Simulated time starts at a
/// fixed epoch and moves only by reported execution durations.
class RunClock {
public:
    static constexpr std::int64_t kSimulatedEpochMs = 1735689600000;  // 2025-01-01T00:00:00Z

    explicit RunClock(ClockMode mode = ClockMode::System);

    std::int64_t now_ms() const;
    void advance(double seconds);
    ClockMode mode() const noexcept { return mode_; }

private:
    ClockMode mode_;
    std::int64_t simulated_ms_ = kSimulatedEpochMs;
};

/// Decides whether the wall-clock budget is spent. Decisions are written to
/// the usage ledger in record mode and served from it in replay mode; a set
/// cancel flag always reads as exhausted.
class BudgetGate {
public:
    BudgetGate(double budget_sec, std::int64_t start_ms, UsageLedger* usage, std::shared_ptr<ReplayLog> replay,
               const std::atomic<bool>* cancel);

    bool exhausted(const RunClock& clock, const std::string& thread);
    bool cancelled() const noexcept { return cancel_ && cancel_->load(); }

private:
    double budget_sec_;
    std::int64_t start_ms_;
    UsageLedger* usage_;
    std::shared_ptr<ReplayLog> replay_;
    const std::atomic<bool>* cancel_;
};

struct RunServices {
    GenerationBackend* gen = nullptr;
    Embedder* embedder = nullptr;
    Environment* env = nullptr;
    WisdomRepository* store = nullptr;
    UsageLedger* usage = nullptr;
    /// Set when re-executing a recorded run.
    std::shared_ptr<ReplayLog> replay;
    /// Event timestamps to reuse by index (replay).
    std::optional<std::vector<std::int64_t>> archived_stamps;
    const std::atomic<bool>* cancel = nullptr;
    std::function<void(const std::string&)> warn;
};

enum class StopReason { StepLimit, WallClock, Interrupted, BootstrapExhausted, PlanProposalExhausted, PromotionFailed };

std::string_view to_string(StopReason reason) noexcept;

struct RunResult {
    std::optional<Solution> solution;
    std::size_t phases_completed = 0;
    std::size_t peak_context_tokens = 0;
    std::size_t naive_peak_tokens = 0;
    std::size_t events = 0;
    std::filesystem::path trace_path;
    StopReason stop_reason = StopReason::StepLimit;
    std::string descriptor;
    std::vector<std::string> prefetched_task_ids;
    bool wisdom_stored = false;
    std::vector<std::string> warnings;

    /// True for orderly ends (limits reached); false for aborts.
    bool ok() const;
};

/// Appends artifacts under the run directory as the run progresses.
class RunDirectory {
public:
    /// Creates the directory; truncates events.jsonl and promotions.jsonl.
    explicit RunDirectory(std::filesystem::path root);

    const std::filesystem::path& root() const noexcept { return root_; }
    std::filesystem::path usage_path() const { return root_ / "usage.jsonl"; }
    std::filesystem::path workspaces() const { return root_ / "workspaces"; }

    void append_event(const Event& event);
    void append_promotion(const PromotionRecord& record);
    void write_sidecar(const EventLog& log, const PhaseLedger& ledger);
    void write_result(const nlohmann::json& result);

private:
    std::filesystem::path root_;
    std::ofstream events_;
    std::ofstream promotions_;
};

/// Outcome of one phase as seen by the loop.
struct PhaseOutcome {
    std::vector<Trajectory> trajectories;
    bool aborted = false;
    bool promoted = false;
};

class Orchestrator {
public:
    Orchestrator(TaskSpec task, Config config, RunServices services, std::filesystem::path run_dir);

    /// Full task: bootstrap, phases until a limit, finalization. Aborts are
    /// reported through the result's stop reason after finalization.
    RunResult run();

    // Individual stages, exposed for tests. Each appends to the log.

    /// d_τ, Ω_τ and e_0.
    void initialize();
    /// Draft plus bounded debug rounds; marks t_0. Throws BootstrapExhausted.
    void bootstrap();
    /// Appends the PlanProposal event. Throws PlanProposalExhausted.
    PhasePlan propose_plan();
    /// Runs, merges, closes and promotes one phase.
    PhaseOutcome run_phase(const PhasePlan& plan);
    /// Solution extraction, task promotion and trace.
    RunResult finalize(StopReason reason);

    const EventLog& log() const noexcept { return log_; }
    const PhaseLedger& ledger() const noexcept { return ledger_; }
    const L2Store& l2() const noexcept { return l2_; }
    const std::vector<PromotionRecord>& promotions() const noexcept { return promotions_; }
    const std::vector<PrefetchHit>& prefetched() const noexcept { return prefetched_; }
    const std::string& descriptor() const noexcept { return descriptor_; }
    const RunDirectory& run_directory() const noexcept { return dir_; }

private:
    struct Exchange;
    struct TrajectoryJob;
    struct TrajectoryRun;

    EventIndex append(Event event);
    Event stamped(Origin origin, EventKind kind, std::string payload, ThreadTag thread, std::int64_t at_ms) const;
    void warn(const std::string& message);
    bool step_room(std::size_t events) const;
    bool better(double candidate, const std::optional<double>& incumbent) const;
    std::string coding_prompt(PromptName name, Bindings bindings) const;
    std::string debug_prompt(const std::string& buggy_code, const std::string& terminal_output) const;
    std::string improve_prompt(const Direction& direction, const std::string& suggestion) const;
    std::string plan_prompt() const;
    GenerationRequest request(PromptName name, std::string rendered, const std::string& thread) const;
    Exchange exchange(const GenerationRequest& req, Workspace& workspace, const std::string& script_name,
                      RunClock& clock) const;
    TrajectoryRun run_trajectory(const TrajectoryJob& job, RunClock& clock);

    TaskSpec task_;
    Config config_;
    RunServices services_;
    RunDirectory dir_;
    MigrationOptions migration_;
    RunClock clock_;
    std::unique_ptr<BudgetGate> budget_;

    EventLog log_;
    PhaseLedger ledger_;
    L2Store l2_;
    std::vector<PromotionRecord> promotions_;
    std::string descriptor_;
    std::vector<PrefetchHit> prefetched_;
    std::vector<WisdomEntry> prefetched_entries_;
    std::string data_knowledge_;
    std::string model_knowledge_;
    std::string initial_code_;
    std::size_t plans_proposed_ = 0;
    std::vector<std::string> warnings_;
};

/// Convenience wrapper around Orchestrator::run.
RunResult run_task(const TaskSpec& task, const Config& config, RunServices services,
                   const std::filesystem::path& run_dir);

// ---- runtime assembly ------------------------------------------------------

enum class RunMode { Normal, Record, Replay };

/// Backends and environment built from a config, wrapped for concurrency
/// limits and usage accounting (or replay).
struct Runtime {
    std::unique_ptr<GenerationBackend> base_gen;
    std::unique_ptr<GenerationBackend> limited_gen;
    std::unique_ptr<GenerationBackend> recording_gen;
    std::unique_ptr<Embedder> base_embedder;
    std::unique_ptr<Embedder> recording_embedder;
    std::unique_ptr<Environment> base_env;
    std::unique_ptr<Environment> recording_env;
    std::unique_ptr<UsageLedger> usage;
    std::shared_ptr<ReplayLog> replay;

    GenerationBackend& gen() const { return *recording_gen; }
    Embedder& embedder() const { return *recording_embedder; }
    Environment& env() const { return *recording_env; }
};

/// Throws InvalidConfig (e.g. a missing API key variable).
Runtime make_runtime(const Config& config, const TaskSpec& task, const std::filesystem::path& run_dir, RunMode mode,
                     std::shared_ptr<ReplayLog> replay = nullptr);

}  // namespace hcc
