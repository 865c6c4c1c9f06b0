#include "hcc/error.hpp"

namespace hcc {

std::string_view to_string(Errc code) noexcept {
    switch (code) {
        case Errc::AlternationViolation: return "AlternationViolation";
        case Errc::IndexGap: return "IndexGap";
        case Errc::OutOfRange: return "OutOfRange";
        case Errc::NonMonotoneBoundary: return "NonMonotoneBoundary";
        case Errc::EmptyPhase: return "EmptyPhase";
        case Errc::NoValidSolution: return "NoValidSolution";
        case Errc::AlreadyEvicted: return "AlreadyEvicted";
        case Errc::AlreadyPromoted: return "AlreadyPromoted";
        case Errc::FormatViolation: return "FormatViolation";
        case Errc::DimensionMismatch: return "DimensionMismatch";
        case Errc::ZeroVector: return "ZeroVector";
        case Errc::DuplicateTask: return "DuplicateTask";
        case Errc::UnknownTask: return "UnknownTask";
        case Errc::CorruptStore: return "CorruptStore";
        case Errc::MissingBinding: return "MissingBinding";
        case Errc::UnknownTemplate: return "UnknownTemplate";
        case Errc::Timeout: return "Timeout";
        case Errc::BackendFailure: return "BackendFailure";
        case Errc::ScriptExhausted: return "ScriptExhausted";
        case Errc::MalformedPlan: return "MalformedPlan";
        case Errc::TooFewDirections: return "TooFewDirections";
        case Errc::NoCodeBlock: return "NoCodeBlock";
        case Errc::MultipleBlocks: return "MultipleBlocks";
        case Errc::DimensionDrift: return "DimensionDrift";
        case Errc::IoFailure: return "IoFailure";
        case Errc::SandboxFailure: return "SandboxFailure";
        case Errc::BootstrapExhausted: return "BootstrapExhausted";
        case Errc::PlanProposalExhausted: return "PlanProposalExhausted";
        case Errc::PhaseAborted: return "PhaseAborted";
        case Errc::CorruptRun: return "CorruptRun";
        case Errc::ReplayDivergence: return "ReplayDivergence";
        case Errc::InvalidConfig: return "InvalidConfig";
        case Errc::PreconditionFailed: return "PreconditionFailed";
    }
    return "Unknown";
}

Errc errc_from_string(std::string_view name) noexcept {
    for (int i = 0; i <= static_cast<int>(Errc::PreconditionFailed); ++i) {
        auto code = static_cast<Errc>(i);
        if (to_string(code) == name) return code;
    }
    return Errc::BackendFailure;
}

}  // namespace hcc
