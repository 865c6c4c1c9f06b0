#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace hcc {

enum class Errc {
    // event-log
    AlternationViolation,
    IndexGap,
    OutOfRange,
    NonMonotoneBoundary,
    EmptyPhase,
    NoValidSolution,
    AlreadyEvicted,
    // cache-hierarchy / migration
    AlreadyPromoted,
    FormatViolation,
    // wisdom-store
    DimensionMismatch,
    ZeroVector,
    DuplicateTask,
    UnknownTask,
    CorruptStore,
    // llm-gateway
    MissingBinding,
    UnknownTemplate,
    Timeout,
    BackendFailure,
    ScriptExhausted,
    MalformedPlan,
    TooFewDirections,
    NoCodeBlock,
    MultipleBlocks,
    DimensionDrift,
    // sandbox
    IoFailure,
    SandboxFailure,
    // orchestrator
    BootstrapExhausted,
    PlanProposalExhausted,
    PhaseAborted,
    // cli / run artifacts
    CorruptRun,
    ReplayDivergence,
    InvalidConfig,
    PreconditionFailed,
};

std::string_view to_string(Errc code) noexcept;
/// Inverse of to_string; unknown names map to BackendFailure.
Errc errc_from_string(std::string_view name) noexcept;

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    Errc code() const noexcept { return code_; }

    // Set for HTTP 429 / 503 responses that carried a Retry-After header.
    std::optional<double> retry_after_sec;

private:
    Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& message) { throw Error(code, message); }

}  // namespace hcc
