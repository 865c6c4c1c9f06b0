#include "hcc/migration.hpp"

#include <algorithm>
#include <array>
#include <cstdio>

#include "hcc/error.hpp"
#include "hcc/prompts.hpp"
#include "hcc/text_util.hpp"

namespace hcc {

namespace {

bool is_list_item(std::string_view line) {
    std::string trimmed = text::trim(line);
    if (trimmed.empty()) return false;
    if (trimmed[0] == '-' || trimmed[0] == '*' || trimmed[0] == '+') return trimmed.size() == 1 || trimmed[1] == ' ';
    std::size_t k = 0;
    while (k < trimmed.size() && std::isdigit(static_cast<unsigned char>(trimmed[k]))) ++k;
    return k > 0 && k + 1 < trimmed.size() && (trimmed[k] == '.' || trimmed[k] == ')') && trimmed[k + 1] == ' ';
}

std::string metric_text(double value) {
    std::array<char, 32> buffer{};
    std::snprintf(buffer.data(), buffer.size(), "%.10g", value);
    return buffer.data();
}

std::string with_attempt_context(std::size_t attempt, std::size_t attempts) {
    return "attempt " + std::to_string(attempt) + "/" + std::to_string(attempts);
}

}  // namespace

std::optional<std::string> descriptor_violation(std::string_view text, std::size_t max_tokens) {
    std::string trimmed = text::trim(text);
    if (trimmed.empty()) return "empty descriptor";
    if (trimmed.find('`') != std::string::npos) return "contains backticks or a code fence";
    for (const auto& line : text::split_lines(trimmed)) {
        if (text::trim(line).empty()) return "contains a blank line (more than one paragraph)";
        if (is_list_item(line)) return "contains a list item";
        if (text::trim(line).front() == '#') return "contains a heading";
    }
    if (default_token_estimate(trimmed) > max_tokens)
        return "longer than " + std::to_string(max_tokens) + " tokens";
    return std::nullopt;
}

std::string generate_descriptor(std::string_view task_description, GenerationBackend& gen,
                                const MigrationOptions& options) {
    if (text::trim(task_description).empty()) fail(Errc::PreconditionFailed, "empty task description");
    GenerationRequest request;
    request.prompt = PromptName::Descriptor;
    request.rendered_prompt = render_prompt(PromptName::Descriptor, {{"task_description", std::string(task_description)}});
    request.timeout_sec = options.timeout_sec;

    const std::size_t attempts = std::max<std::size_t>(1, options.format_attempts);
    std::string last_problem;
    for (std::size_t attempt = 1; attempt <= attempts; ++attempt) {
        std::string response = generate(gen, request);
        auto problem = descriptor_violation(response, options.descriptor_max_tokens);
        if (!problem) {
            // Soft-wrapped lines are one paragraph; store it on one line.
            return text::join(text::split_lines(text::trim(response)), " ");
        }
        last_problem = *problem + " (" + with_attempt_context(attempt, attempts) + ")";
    }
    fail(Errc::FormatViolation, "descriptor rejected: " + last_problem);
}

std::string_view to_string(TrajectoryOutcome outcome) noexcept {
    switch (outcome) {
        case TrajectoryOutcome::Improved: return "Improved";
        case TrajectoryOutcome::NoImprovement: return "NoImprovement";
        case TrajectoryOutcome::Failed: return "Failed";
    }
    return "Failed";
}

nlohmann::json to_json(const PromotionRecord& record) {
    return nlohmann::json{{"phase", record.phase},
                          {"evictedIndices", record.evicted},
                          {"knowledgeUnit",
                           {{"phase", record.unit.phase},
                            {"coveredRange", {record.unit.range_start, record.unit.range_end}},
                            {"text", record.unit.text},
                            {"tokenEstimate", record.unit.token_estimate}}},
                          {"promptTokens", record.prompt_tokens},
                          {"outputTokens", record.output_tokens}};
}

PromotionRecord promotion_record_from_json(const nlohmann::json& json) {
    try {
        PromotionRecord record;
        record.phase = json.at("phase").get<int>();
        record.evicted = json.at("evictedIndices").get<std::vector<EventIndex>>();
        const auto& unit = json.at("knowledgeUnit");
        record.unit.phase = unit.at("phase").get<int>();
        record.unit.range_start = unit.at("coveredRange").at(0).get<EventIndex>();
        record.unit.range_end = unit.at("coveredRange").at(1).get<EventIndex>();
        record.unit.text = unit.at("text").get<std::string>();
        record.unit.token_estimate = unit.at("tokenEstimate").get<std::size_t>();
        record.prompt_tokens = json.value("promptTokens", std::size_t{0});
        record.output_tokens = json.value("outputTokens", std::size_t{0});
        return record;
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::CorruptRun, std::string("malformed promotion record: ") + e.what());
    }
}

std::string render_memory(const EventLog& log, const L2Store& l2) {
    if (l2.empty()) return "(no previous research plans)";
    std::vector<std::string> parts;
    for (const auto& unit : l2.units()) {
        std::string part = "## Research plan " + std::to_string(unit.phase);
        if (unit.range_start >= 1 && unit.range_start - 1 < log.size()) {
            const Event& plan = log.at(unit.range_start - 1);
            if (plan.kind == EventKind::PlanProposal) part += "\n\n" + plan.payload;
        }
        part += "\n\n## Summarized results of plan " + std::to_string(unit.phase) + "\n\n" + unit.text;
        parts.push_back(std::move(part));
    }
    return text::join(parts, "\n\n");
}

std::string render_trajectories(const EventLog& log, const PhasePlan& plan, std::span<const Trajectory> trajectories,
                                std::size_t per_event_cap) {
    std::vector<std::string> parts;
    for (const auto& trajectory : trajectories) {
        std::string part = "## Direction " + std::to_string(trajectory.direction);
        const auto& directions = plan.plan.directions;
        const bool known = trajectory.direction >= 1 && static_cast<std::size_t>(trajectory.direction) <= directions.size();
        if (known) part += ": " + directions[trajectory.direction - 1].title;
        part += "\n### Suggestion " + std::to_string(trajectory.suggestion);
        if (known) {
            const auto& suggestions = directions[trajectory.direction - 1].suggestions;
            if (trajectory.suggestion >= 1 && static_cast<std::size_t>(trajectory.suggestion) <= suggestions.size())
                part += ": " + suggestions[trajectory.suggestion - 1];
        }
        part += "\nOutcome: " + std::string(to_string(trajectory.outcome));
        if (trajectory.best_metric) part += " (best validation metric " + metric_text(*trajectory.best_metric) + ")";
        for (const auto& event : log.slice(trajectory.start, trajectory.end)) {
            part += "\n\n[" + std::string(to_string(event.origin)) + "] " +
                    text::truncate_to_tokens(event.payload, per_event_cap);
        }
        parts.push_back(std::move(part));
    }
    return text::join(parts, "\n\n");
}

std::vector<EventIndex> trajectory_indices(std::span<const Trajectory> trajectories) {
    std::vector<EventIndex> indices;
    for (const auto& trajectory : trajectories)
        for (EventIndex k = trajectory.start; k <= trajectory.end; ++k) indices.push_back(k);
    std::sort(indices.begin(), indices.end());
    indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
    return indices;
}

PromotionRecord promote_phase(const PhasePlan& plan, std::span<const Trajectory> trajectories,
                              std::string_view task_description, EventLog& log, L2Store& l2, GenerationBackend& gen,
                              const MigrationOptions& options) {
    if (l2.has_phase(plan.phase)) fail(Errc::AlreadyPromoted, "phase " + std::to_string(plan.phase) + " already promoted");
    if (plan.plan_event_index >= log.size() || log.at(plan.plan_event_index).kind != EventKind::PlanProposal)
        fail(Errc::PreconditionFailed, "phase " + std::to_string(plan.phase) + " has no plan event at " +
                                           std::to_string(plan.plan_event_index));
    if (trajectories.empty()) fail(Errc::PreconditionFailed, "phase " + std::to_string(plan.phase) + " has no trajectories");
    const EventIndex last = log.size() - 1;
    for (const auto& trajectory : trajectories) {
        if (trajectory.phase != plan.phase || trajectory.start <= plan.plan_event_index ||
            trajectory.start > trajectory.end || trajectory.end > last)
            fail(Errc::PreconditionFailed, "trajectory " + trajectory.thread().label() + " outside phase span");
        for (EventIndex k = trajectory.start; k <= trajectory.end; ++k) {
            if (log.at(k).thread != trajectory.thread())
                fail(Errc::PreconditionFailed, "event " + std::to_string(k) + " is not on " + trajectory.thread().label());
            if (log.is_evicted(k)) fail(Errc::AlreadyEvicted, "event " + std::to_string(k) + " already evicted");
        }
    }

    GenerationRequest request;
    request.prompt = PromptName::PromoteP1;
    request.timeout_sec = options.timeout_sec;
    request.rendered_prompt = render_prompt(
        PromptName::PromoteP1, {{"task_description", std::string(task_description)},
                                {"memory", render_memory(log, l2)},
                                {"research_plan", log.at(plan.plan_event_index).payload},
                                {"results", render_trajectories(log, plan, trajectories, options.per_event_cap)}});

    const std::size_t attempts = std::max<std::size_t>(1, options.format_attempts);
    std::string summary;
    std::size_t prompt_tokens = 0;
    for (std::size_t attempt = 1; attempt <= attempts && summary.empty(); ++attempt) {
        prompt_tokens += log.count_tokens(request.rendered_prompt);
        summary = text::trim(generate(gen, request));
    }
    if (summary.empty()) fail(Errc::FormatViolation, "phase summary was empty after " + std::to_string(attempts) + " attempts");

    // Summary in hand: the cache mutation below cannot fail part way.
    PromotionRecord record;
    record.phase = plan.phase;
    record.evicted = trajectory_indices(trajectories);
    record.unit = KnowledgeUnit{plan.phase, plan.plan_event_index + 1, last, summary, log.count_tokens(summary)};
    record.prompt_tokens = prompt_tokens;
    record.output_tokens = record.unit.token_estimate;
    l2.add(record.unit);
    for (EventIndex k : record.evicted) log.mark_evicted(k);
    return record;
}

bool has_wisdom_sections(std::string_view text) {
    auto data = text.find("DATA SUMMARY:");
    if (data == std::string_view::npos) return false;
    return text.find("MODEL SUMMARY:", data) != std::string_view::npos;
}

TaskPromotion promote_task(std::string_view descriptor, std::string_view task_id, std::string_view task_description,
                           const EventLog& log, const PhaseLedger& ledger, const L2Store& l2,
                           const std::optional<Solution>& solution, GenerationBackend& gen, Embedder& embedder,
                           WisdomRepository& store, const MigrationOptions& options, OverwritePolicy policy) {
    if (text::trim(descriptor).empty()) fail(Errc::PreconditionFailed, "empty descriptor");

    std::string history;
    if (!log.empty()) {
        ContextView view = build_context(log, ledger, l2, log.size());
        std::vector<std::string> parts;
        for (const auto& segment : view.segments) parts.push_back(text::truncate_to_tokens(segment.text, options.per_event_cap));
        history = text::join(parts, "\n\n");
    }
    std::string final_code = solution ? "## Final code (validation metric " + metric_text(solution->validation_metric) +
                                            ")\n\n```python\n" + solution->code + "\n```"
                                      : "## Final code\n\n(absent: no validated solution was produced)";

    GenerationRequest request;
    request.prompt = PromptName::PromoteP2;
    request.timeout_sec = options.timeout_sec;
    request.rendered_prompt = render_prompt(PromptName::PromoteP2,
                                            {{"task_name", std::string(task_id)},
                                             {"task_description", std::string(task_description)},
                                             {"trajectories", history + (history.empty() ? "" : "\n\n") + final_code}});

    const std::size_t attempts = std::max<std::size_t>(1, options.format_attempts);
    std::string wisdom;
    for (std::size_t attempt = 1; attempt <= attempts; ++attempt) {
        std::string response = text::trim(generate(gen, request));
        if (has_wisdom_sections(response)) {
            wisdom = std::move(response);
            break;
        }
    }
    TaskPromotion result;
    if (wisdom.empty()) {
        result.warning = "wisdom for " + std::string(task_id) + " lacks DATA SUMMARY:/MODEL SUMMARY: after " +
                         std::to_string(attempts) + " attempts; not stored";
        return result;
    }
    Vector key = embed(embedder, descriptor);
    try {
        store.insert(std::string(task_id), std::string(descriptor), key, wisdom, policy);
    } catch (const Error& e) {
        if (e.code() != Errc::DuplicateTask) throw;
        result.warning = std::string(e.what());
        return result;
    }
    result.entry = WisdomEntry{std::string(task_id), std::string(descriptor), key, wisdom};
    return result;
}

}  // namespace hcc
