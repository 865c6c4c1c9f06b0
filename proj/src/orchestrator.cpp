#include "hcc/orchestrator.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "hcc/error.hpp"
#include "hcc/prompts.hpp"
#include "hcc/text_util.hpp"

namespace hcc {

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::IoFailure, "cannot read " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

std::string metric_text(double value) {
    std::array<char, 32> buffer{};
    std::snprintf(buffer.data(), buffer.size(), "%.10g", value);
    return buffer.data();
}

std::string or_placeholder(const std::string& text, std::string_view placeholder) {
    return text::trim(text).empty() ? std::string(placeholder) : text;
}

// Text after `header` up to `stop` (or the end), trimmed.
std::string section_of(std::string_view text, std::string_view header, std::string_view stop) {
    auto start = text.find(header);
    if (start == std::string_view::npos) return {};
    start += header.size();
    auto end = stop.empty() ? std::string_view::npos : text.find(stop, start);
    return text::trim(text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start));
}

std::string fallback_descriptor(std::string_view description, std::size_t max_tokens) {
    std::istringstream in{std::string(description)};
    std::string word;
    std::string out;
    while (in >> word) {
        std::string next = out.empty() ? word : out + " " + word;
        if (default_token_estimate(next) > max_tokens) break;
        out = std::move(next);
    }
    return out;
}

void write_atomically(const fs::path& path, const std::string& content) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << content;
        if (!out) fail(Errc::IoFailure, "cannot write " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) fail(Errc::IoFailure, "cannot replace " + path.string() + ": " + ec.message());
}

}  // namespace

// ---- task ------------------------------------------------------------------

TaskSpec load_task(const fs::path& task_dir, const Config& config) {
    std::error_code ec;
    if (!fs::is_directory(task_dir, ec)) fail(Errc::IoFailure, "task directory not found: " + task_dir.string());
    const fs::path description = task_dir / "description.md";
    if (!fs::is_regular_file(description, ec)) fail(Errc::IoFailure, "missing " + description.string());
    TaskSpec task;
    task.task_id = fs::absolute(task_dir).lexically_normal().filename().string();
    if (task.task_id.empty()) task.task_id = fs::absolute(task_dir).lexically_normal().parent_path().filename().string();
    task.description = text::trim(read_file(description));
    if (task.description.empty()) fail(Errc::IoFailure, description.string() + " is empty");
    task.data_dir = task_dir / "data";
    if (!fs::is_directory(task.data_dir, ec)) fail(Errc::IoFailure, "missing data directory " + task.data_dir.string());
    if (fs::is_regular_file(task_dir / "preview.md", ec)) task.data_preview = text::trim(read_file(task_dir / "preview.md"));
    task.user_instructions = config.task.user_instructions;
    if (fs::is_regular_file(task_dir / "instructions.md", ec))
        task.user_instructions = text::trim(read_file(task_dir / "instructions.md"));
    task.metric_direction = config.task.metric_direction;
    return task;
}

nlohmann::json to_json(const TaskSpec& task) {
    return nlohmann::json{{"taskId", task.task_id},
                          {"dataDir", task.data_dir.string()},
                          {"metricDirection", to_string(task.metric_direction)},
                          {"userInstructions", task.user_instructions},
                          {"descriptionTokens", default_token_estimate(task.description)}};
}

// ---- clock and budget --------------------------------------------------------

RunClock::RunClock(ClockMode mode) : mode_(mode) {}

std::int64_t RunClock::now_ms() const {
    if (mode_ == ClockMode::Simulated) return simulated_ms_;
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

void RunClock::advance(double seconds) {
    if (mode_ == ClockMode::Simulated && seconds > 0) simulated_ms_ += std::llround(seconds * 1000.0);
}

BudgetGate::BudgetGate(double budget_sec, std::int64_t start_ms, UsageLedger* usage, std::shared_ptr<ReplayLog> replay,
                       const std::atomic<bool>* cancel)
    : budget_sec_(budget_sec), start_ms_(start_ms), usage_(usage), replay_(std::move(replay)), cancel_(cancel) {}

bool BudgetGate::exhausted(const RunClock& clock, const std::string& thread) {
    if (cancelled()) return true;
    if (replay_) {
        const std::uint64_t seq = replay_->next_sequence("budget", thread);
        const nlohmann::json* entry = replay_->find("budget", thread, seq);
        if (!entry) fail(Errc::ScriptExhausted, "no recorded budget decision #" + std::to_string(seq) + " on " + thread);
        return entry->value("exhausted", false);
    }
    const double elapsed = static_cast<double>(clock.now_ms() - start_ms_) / 1000.0;
    const bool spent = elapsed >= budget_sec_;
    if (usage_ && usage_->recording()) {
        usage_->append({{"type", "budget"},
                        {"thread", thread},
                        {"seq", usage_->next_sequence("budget", thread)},
                        {"elapsedSec", elapsed},
                        {"exhausted", spent}});
    }
    return spent;
}

std::string_view to_string(StopReason reason) noexcept {
    switch (reason) {
        case StopReason::StepLimit: return "StepLimit";
        case StopReason::WallClock: return "WallClock";
        case StopReason::Interrupted: return "Interrupted";
        case StopReason::BootstrapExhausted: return "BootstrapExhausted";
        case StopReason::PlanProposalExhausted: return "PlanProposalExhausted";
        case StopReason::PromotionFailed: return "PromotionFailed";
    }
    return "StepLimit";
}

bool RunResult::ok() const {
    return stop_reason == StopReason::StepLimit || stop_reason == StopReason::WallClock;
}

// ---- run directory -----------------------------------------------------------

RunDirectory::RunDirectory(fs::path root) : root_(std::move(root)) {
    std::error_code ec;
    fs::create_directories(root_, ec);
    if (ec) fail(Errc::IoFailure, "cannot create run directory " + root_.string() + ": " + ec.message());
    events_.open(root_ / "events.jsonl", std::ios::binary | std::ios::trunc);
    promotions_.open(root_ / "promotions.jsonl", std::ios::binary | std::ios::trunc);
    if (!events_ || !promotions_) fail(Errc::IoFailure, "cannot open run files in " + root_.string());
    fs::remove(root_ / "trace.csv", ec);
    fs::remove(root_ / "result.json", ec);
}

void RunDirectory::append_event(const Event& event) {
    events_ << event_line(event) << '\n';
    events_.flush();
    if (!events_) fail(Errc::IoFailure, "cannot append to events.jsonl");
}

void RunDirectory::append_promotion(const PromotionRecord& record) {
    promotions_ << to_json(record).dump() << '\n';
    promotions_.flush();
    if (!promotions_) fail(Errc::IoFailure, "cannot append to promotions.jsonl");
}

void RunDirectory::write_sidecar(const EventLog& log, const PhaseLedger& ledger) {
    hcc::write_sidecar(sidecar_from(log, ledger), root_ / "sidecar.json");
}

void RunDirectory::write_result(const nlohmann::json& result) { write_atomically(root_ / "result.json", result.dump(2) + "\n"); }

// ---- orchestrator --------------------------------------------------------------

struct Orchestrator::Exchange {
    std::optional<Event> patch;
    std::optional<Event> output;
    std::string code;
    bool working = false;
    std::optional<double> metric;
    std::optional<std::string> warning;
};

struct Orchestrator::TrajectoryJob {
    int phase = 0;
    int direction = 0;
    int suggestion = 0;
    std::string title;
    std::string idea;
    std::size_t max_events = 0;
    std::optional<double> best_at_start;
};

struct Orchestrator::TrajectoryRun {
    std::vector<Event> events;
    TrajectoryOutcome outcome = TrajectoryOutcome::Failed;
    std::optional<double> best_metric;
    bool cut = false;
    std::vector<std::string> warnings;
};

Orchestrator::Orchestrator(TaskSpec task, Config config, RunServices services, fs::path run_dir)
    : task_(std::move(task)),
      config_(std::move(config)),
      services_(std::move(services)),
      dir_(std::move(run_dir)),
      clock_(config_.run.clock) {
    if (!services_.gen || !services_.embedder || !services_.env || !services_.store)
        fail(Errc::PreconditionFailed, "orchestrator needs generation, embedding, environment and store");
    migration_.format_attempts = config_.run.format_attempts;
    migration_.per_event_cap = config_.run.per_event_truncation_cap;
    migration_.timeout_sec = config_.limits.request_timeout_sec;
    budget_ = std::make_unique<BudgetGate>(config_.run.wall_clock_budget_sec, clock_.now_ms(), services_.usage,
                                           services_.replay, services_.cancel);
}

void Orchestrator::warn(const std::string& message) {
    warnings_.push_back(message);
    if (services_.warn) services_.warn(message);
}

bool Orchestrator::step_room(std::size_t events) const { return log_.size() + events <= config_.run.step_limit; }

bool Orchestrator::better(double candidate, const std::optional<double>& incumbent) const {
    if (!incumbent) return true;
    return task_.metric_direction == MetricDirection::HigherIsBetter ? candidate > *incumbent : candidate < *incumbent;
}

Event Orchestrator::stamped(Origin origin, EventKind kind, std::string payload, ThreadTag thread,
                            std::int64_t at_ms) const {
    Event event = log_.make(origin, kind, std::move(payload), thread);
    event.wall_clock_ms = at_ms;
    return event;
}

EventIndex Orchestrator::append(Event event) {
    event.index = log_.size();
    event.token_estimate = log_.count_tokens(event.payload);
    if (services_.archived_stamps && event.index < services_.archived_stamps->size())
        event.wall_clock_ms = (*services_.archived_stamps)[event.index];
    const EventIndex index = log_.append(std::move(event));
    dir_.append_event(log_.at(index));
    return index;
}

GenerationRequest Orchestrator::request(PromptName name, std::string rendered, const std::string& thread) const {
    GenerationRequest req;
    req.prompt = name;
    req.rendered_prompt = std::move(rendered);
    req.thread = thread;
    req.timeout_sec = config_.limits.request_timeout_sec;
    if (config_.raw.contains("run.seed")) req.options["seed"] = std::to_string(config_.run.seed);
    return req;
}

std::string Orchestrator::coding_prompt(PromptName name, Bindings bindings) const {
    bindings["task_description"] = task_.description;
    bindings["data_preview"] = or_placeholder(task_.data_preview, "(no data preview available)");
    return with_kernel_instructions(render_prompt(name, bindings), task_.user_instructions);
}

std::string Orchestrator::debug_prompt(const std::string& buggy_code, const std::string& terminal_output) const {
    return coding_prompt(PromptName::Debug,
                         {{"buggy_code", buggy_code},
                          {"terminal_output", text::truncate_to_tokens(terminal_output, migration_.per_event_cap)}});
}

std::string Orchestrator::improve_prompt(const Direction& direction, const std::string& suggestion) const {
    std::string memory = render_memory(log_, l2_);
    auto best = try_extract_solution(log_, task_.metric_direction);
    std::string previous = "## Memory\n\n" + memory + "\n\n## Previous best solution";
    if (best) {
        previous += " (validation metric " + metric_text(best->validation_metric) + ")\n\n```python\n" + best->code + "\n```";
    } else {
        previous += "\n\n```python\n" + initial_code_ + "\n```";
    }
    return coding_prompt(PromptName::Improve,
                         {{"improve_idea", "Direction: " + direction.title + "\nSuggestion: " + suggestion},
                          {"previous_memory_solution", previous}});
}

std::string Orchestrator::plan_prompt() const {
    auto best = try_extract_solution(log_, task_.metric_direction);
    std::string prompt = render_prompt(PromptName::Plan,
                                       {{"task_description", task_.description},
                                        {"data_preview", or_placeholder(task_.data_preview, "(no data preview available)")},
                                        {"initial_code", initial_code_},
                                        {"best_code", best ? best->code : initial_code_},
                                        {"memory", render_memory(log_, l2_)}});
    prompt += "\n\n# Additional instructions\n\n- Propose exactly " + std::to_string(config_.run.directions) +
              " major directions with " + std::to_string(config_.run.suggestions) + " suggestions each.\n";
    return prompt;
}

void Orchestrator::initialize() {
    if (!log_.empty()) fail(Errc::PreconditionFailed, "run already initialized");
    try {
        descriptor_ = generate_descriptor(task_.description, *services_.gen, migration_);
    } catch (const Error& e) {
        descriptor_ = fallback_descriptor(task_.description, migration_.descriptor_max_tokens);
        warn(std::string("descriptor generation failed (") + e.what() + "); using the description's opening words");
    }

    std::vector<std::pair<WisdomEntry, double>> hits;
    try {
        Vector query = embed(*services_.embedder, descriptor_);
        if (services_.replay) {
            for (const auto& item : services_.replay->prefetched_entries()) {
                WisdomEntry entry{item.at("taskId").get<std::string>(), item.value("descriptor", ""), {},
                                  item.value("wisdom", "")};
                hits.emplace_back(std::move(entry), item.value("similarity", 0.0));
            }
        } else {
            WisdomStore snapshot = services_.store->snapshot();
            for (const auto& hit : snapshot.prefetch(query, config_.run.delta, config_.run.max_prefetch))
                hits.emplace_back(*hit.entry, hit.similarity);
        }
    } catch (const Error& e) {
        warn(std::string("prefetch skipped: ") + e.what());
    }
    if (services_.usage && services_.usage->recording()) {
        nlohmann::json entries = nlohmann::json::array();
        for (const auto& [entry, similarity] : hits)
            entries.push_back({{"taskId", entry.task_id},
                               {"descriptor", entry.descriptor},
                               {"wisdom", entry.wisdom},
                               {"similarity", similarity}});
        services_.usage->append({{"type", "prefetch"}, {"entries", entries}});
    }
    prefetched_entries_.clear();
    for (auto& [entry, similarity] : hits) prefetched_entries_.push_back(entry);
    prefetched_.clear();
    for (std::size_t n = 0; n < hits.size(); ++n) prefetched_.push_back({&prefetched_entries_[n], hits[n].second});

    // e_0 = concat(d_τ, u_user, Ω_τ)
    std::string payload = "# Task\n\n" + descriptor_;
    if (!text::trim(task_.user_instructions).empty()) payload += "\n\n# User instructions\n\n" + task_.user_instructions;
    std::vector<std::string> data_parts, model_parts;
    if (!prefetched_.empty()) {
        payload += "\n\n# Prior wisdom";
        for (const auto& hit : prefetched_) {
            std::array<char, 32> similarity{};
            std::snprintf(similarity.data(), similarity.size(), "%.4f", hit.similarity);
            payload += "\n\n## From " + hit.entry->task_id + " (similarity " + similarity.data() + ")\n\n" + hit.entry->wisdom;
            std::string data = section_of(hit.entry->wisdom, "DATA SUMMARY:", "MODEL SUMMARY:");
            std::string model = section_of(hit.entry->wisdom, "MODEL SUMMARY:", "");
            if (!data.empty()) data_parts.push_back("From " + hit.entry->task_id + ":\n" + data);
            if (!model.empty()) model_parts.push_back("From " + hit.entry->task_id + ":\n" + model);
        }
    }
    data_knowledge_ = data_parts.empty() ? "(no prior knowledge retrieved)" : text::join(data_parts, "\n\n");
    model_knowledge_ = model_parts.empty() ? "(no prior knowledge retrieved)" : text::join(model_parts, "\n\n");
    append(stamped(Origin::Environment, EventKind::TaskInit, payload, ThreadTag::main(), clock_.now_ms()));
}

Orchestrator::Exchange Orchestrator::exchange(const GenerationRequest& req, Workspace& workspace,
                                              const std::string& script_name, RunClock& clock) const {
    Exchange out;
    const ThreadTag thread = ThreadTag::parse(req.thread);
    std::string response;
    try {
        response = generate(*services_.gen, req);
    } catch (const Error& e) {
        out.warning = "generation failed on " + req.thread + ": " + e.what();
        return out;
    }
    out.patch = stamped(Origin::Agent, EventKind::CodePatch, response, thread, clock.now_ms());
    try {
        out.code = extract_code_block(response);
    } catch (const Error&) {
        out.code = response;
        out.output = stamped(Origin::Environment, EventKind::TerminalOutput,
                             "NO CODE BLOCK: the response did not contain a fenced code block, nothing was executed",
                             thread, clock.now_ms());
        return out;
    }
    ExecutionReport report;
    try {
        report = services_.env->run(workspace, out.code, script_name, req.thread);
    } catch (const Error& e) {
        out.output = stamped(Origin::Environment, EventKind::TerminalOutput,
                             std::string("EXECUTION COULD NOT START: ") + e.what(), thread, clock.now_ms());
        return out;
    }
    clock.advance(report.duration_sec);
    Event output = report_to_event(report, thread);
    output.wall_clock_ms = clock.now_ms();
    out.output = std::move(output);
    out.working = report.exit_status == ExitStatus::Success && report.parsed_metric && report.submission_produced;
    out.metric = report.parsed_metric;
    return out;
}

void Orchestrator::bootstrap() {
    if (log_.empty()) fail(Errc::PreconditionFailed, "bootstrap before initialize");
    if (!ledger_.empty()) fail(Errc::PreconditionFailed, "bootstrap already complete");
    Workspace workspace = services_.env->prepare("main");
    std::string last_code;
    std::string last_output;
    for (std::size_t attempt = 0; attempt <= config_.run.max_debug_retries; ++attempt) {
        if (budget_->cancelled()) fail(Errc::PhaseAborted, "interrupted during bootstrap");
        if (!step_room(2)) fail(Errc::BootstrapExhausted, "step limit reached before a working initial solution");
        std::string prompt = attempt == 0 || last_output.empty()
                                 ? coding_prompt(PromptName::Draft, {{"data_knowledge", data_knowledge_},
                                                                     {"model_knowledge", model_knowledge_}})
                                 : debug_prompt(last_code, last_output);
        const std::string script = "solution_" + std::to_string(log_.size()) + ".py";
        Exchange result = exchange(request(attempt == 0 || last_output.empty() ? PromptName::Draft : PromptName::Debug,
                                           std::move(prompt), "main"),
                                   workspace, script, clock_);
        if (result.warning) warn(*result.warning);
        if (!result.patch) continue;
        append(std::move(*result.patch));
        last_output = result.output->payload;
        append(std::move(*result.output));
        last_code = result.code;
        if (result.working) {
            initial_code_ = result.code;
            ledger_.mark(log_.size(), log_);
            dir_.write_sidecar(log_, ledger_);
            return;
        }
    }
    fail(Errc::BootstrapExhausted, "no working initial solution after " +
                                       std::to_string(config_.run.max_debug_retries) + " debug rounds");
}

PhasePlan Orchestrator::propose_plan() {
    if (ledger_.empty()) fail(Errc::PreconditionFailed, "plan proposal before bootstrap");
    if (log_.size() != ledger_.boundaries().back())
        fail(Errc::PreconditionFailed, "previous phase not promoted");
    const std::size_t calls = 1 + config_.run.max_plan_retries;
    bool repair = false;
    std::string last_error;
    std::string last_response;
    for (std::size_t call = 0; call < calls; ++call) {
        std::string prompt = plan_prompt();
        if (repair) {
            prompt += "\n# Your previous response could not be parsed\n\n" + last_error + "\n\nPrevious response:\n\n" +
                      last_response + "\n\nRespond again with only the corrected JSON object.\n";
        }
        std::string response;
        try {
            response = generate(*services_.gen, request(PromptName::Plan, std::move(prompt), "main"));
        } catch (const Error& e) {
            warn(std::string("plan generation failed: ") + e.what());
            repair = false;
            continue;
        }
        try {
            ResearchPlan plan = parse_research_plan(response);
            ++plans_proposed_;
            const int phase = static_cast<int>(ledger_.completed_phases()) + 1;
            const EventIndex index = append(stamped(Origin::Agent, EventKind::PlanProposal,
                                                    serialize_research_plan(plan), ThreadTag::main(), clock_.now_ms()));
            return PhasePlan{phase, index, std::move(plan)};
        } catch (const Error& e) {
            warn(std::string("research plan rejected: ") + e.what());
            last_error = e.what();
            last_response = response;
            // one repair re-ask, then a fresh proposal
            repair = !repair;
        }
    }
    fail(Errc::PlanProposalExhausted, "no usable research plan after " + std::to_string(calls) + " attempts");
}

Orchestrator::TrajectoryRun Orchestrator::run_trajectory(const TrajectoryJob& job, RunClock& clock) {
    TrajectoryRun out;
    const ThreadTag thread = ThreadTag::trajectory(job.phase, job.direction, job.suggestion);
    const std::string label = thread.label();
    Workspace workspace;
    bool prepared = false;
    std::string last_code;
    std::string last_output;
    std::size_t local_step = 0;
    for (std::size_t attempt = 0; attempt <= config_.run.max_debug_retries; ++attempt) {
        if (out.events.size() + 2 > job.max_events) break;
        if (budget_->exhausted(clock, label)) {
            out.cut = true;
            break;
        }
        if (!prepared) {
            try {
                workspace = services_.env->prepare(label);
                prepared = true;
            } catch (const Error& e) {
                out.warnings.push_back("workspace for " + label + " failed: " + e.what());
                break;
            }
        }
        const bool improving = attempt == 0 || last_output.empty();
        std::string prompt = improving ? job.idea : debug_prompt(last_code, last_output);
        const std::string script = "solution_" + std::to_string(local_step) + ".py";
        Exchange result = exchange(request(improving ? PromptName::Improve : PromptName::Debug, std::move(prompt), label),
                                   workspace, script, clock);
        if (result.warning) out.warnings.push_back(*result.warning);
        if (!result.patch) continue;
        local_step += 2;
        out.events.push_back(std::move(*result.patch));
        last_output = result.output->payload;
        out.events.push_back(std::move(*result.output));
        last_code = result.code;
        if (result.working) {
            out.best_metric = result.metric;
            break;
        }
    }
    if (out.best_metric) {
        out.outcome = better(*out.best_metric, job.best_at_start) ? TrajectoryOutcome::Improved
                                                                   : TrajectoryOutcome::NoImprovement;
    }
    return out;
}

PhaseOutcome Orchestrator::run_phase(const PhasePlan& plan) {
    if (plan.plan_event_index + 1 != log_.size()) fail(Errc::PreconditionFailed, "phase must start right after its plan");
    PhaseOutcome outcome;

    // Step budget: the closing note takes one event; the rest is shared
    // equally in whole exchanges.
    const std::size_t available = config_.run.step_limit > log_.size() + 1 ? config_.run.step_limit - log_.size() - 1 : 0;
    std::vector<TrajectoryJob> jobs;
    auto best = try_extract_solution(log_, task_.metric_direction);
    for (std::size_t i = 0; i < plan.plan.directions.size(); ++i) {
        const auto& direction = plan.plan.directions[i];
        for (std::size_t j = 0; j < direction.suggestions.size(); ++j) {
            TrajectoryJob job;
            job.phase = plan.phase;
            job.direction = static_cast<int>(i + 1);
            job.suggestion = static_cast<int>(j + 1);
            job.title = direction.title;
            job.idea = improve_prompt(direction, direction.suggestions[j]);
            if (best) job.best_at_start = best->validation_metric;
            jobs.push_back(std::move(job));
        }
    }
    const std::size_t cap = 2 * (1 + config_.run.max_debug_retries);
    std::size_t per = jobs.empty() ? 0 : std::min(cap, (available / jobs.size()) / 2 * 2);
    if (per < 2) {
        per = 2;
        jobs.resize(std::min(jobs.size(), available / 2));
    }
    for (auto& job : jobs) job.max_events = per;

    // Lane l runs jobs l, l+W, ... in order, so simulated time and budget
    // decisions do not depend on thread timing.
    std::vector<TrajectoryRun> runs(jobs.size());
    const std::size_t lanes = std::min<std::size_t>(std::max<std::size_t>(1, config_.run.worker_limit), jobs.size());
    std::vector<RunClock> lane_clocks(lanes, clock_);
    std::vector<std::exception_ptr> lane_errors(lanes);
    {
        std::vector<std::thread> threads;
        for (std::size_t lane = 0; lane < lanes; ++lane) {
            threads.emplace_back([&, lane] {
                try {
                    for (std::size_t k = lane; k < jobs.size(); k += lanes) runs[k] = run_trajectory(jobs[k], lane_clocks[lane]);
                } catch (...) {
                    lane_errors[lane] = std::current_exception();
                }
            });
        }
        for (auto& thread : threads) thread.join();
    }
    for (auto& error : lane_errors)
        if (error) std::rethrow_exception(error);
    if (clock_.mode() == ClockMode::Simulated) {
        for (const auto& lane_clock : lane_clocks)
            if (lane_clock.now_ms() > clock_.now_ms()) clock_ = lane_clock;
    }

    // Merge in (i, j, local step) order.
    std::string note = "PHASE " + std::to_string(plan.phase) + " RESULTS";
    for (std::size_t k = 0; k < jobs.size(); ++k) {
        auto& run = runs[k];
        for (const auto& warning : run.warnings) warn(warning);
        outcome.aborted = outcome.aborted || run.cut;
        note += "\n" + ThreadTag::trajectory(plan.phase, jobs[k].direction, jobs[k].suggestion).label() + ": ";
        if (run.events.empty()) {
            note += run.cut ? "not started (budget exhausted)" : "no events";
            continue;
        }
        Trajectory trajectory;
        trajectory.phase = plan.phase;
        trajectory.direction = jobs[k].direction;
        trajectory.suggestion = jobs[k].suggestion;
        trajectory.start = log_.size();
        for (auto& event : run.events) append(std::move(event));
        trajectory.end = log_.size() - 1;
        trajectory.outcome = run.outcome;
        trajectory.best_metric = run.best_metric;
        note += std::string(to_string(run.outcome));
        if (run.best_metric) note += " (validation metric " + metric_text(*run.best_metric) + ")";
        if (run.cut) note += ", cut short by the budget";
        outcome.trajectories.push_back(trajectory);
    }
    if (jobs.size() < plan.plan.trajectory_count())
        note += "\n" + std::to_string(plan.plan.trajectory_count() - jobs.size()) + " suggestion(s) skipped: step limit";
    if (outcome.aborted) note += "\nphase aborted: wall-clock budget exhausted";
    append(stamped(Origin::Environment, EventKind::SummaryNote, note, ThreadTag::main(), clock_.now_ms()));

    if (outcome.trajectories.empty()) {
        warn("phase " + std::to_string(plan.phase) + " produced no trajectory events; not promoted");
        return outcome;
    }
    for (std::size_t attempt = 1; attempt <= 2 && !outcome.promoted; ++attempt) {
        try {
            PromotionRecord record =
                promote_phase(plan, outcome.trajectories, task_.description, log_, l2_, *services_.gen, migration_);
            ledger_.mark(log_.size(), log_);
            promotions_.push_back(record);
            dir_.append_promotion(record);
            dir_.write_sidecar(log_, ledger_);
            outcome.promoted = true;
        } catch (const Error& e) {
            if (e.code() == Errc::AlreadyPromoted || e.code() == Errc::PreconditionFailed) throw;
            warn("promotion of phase " + std::to_string(plan.phase) + " failed (attempt " + std::to_string(attempt) +
                 "): " + e.what());
        }
    }
    return outcome;
}

RunResult Orchestrator::finalize(StopReason reason) {
    RunResult result;
    result.stop_reason = reason;
    result.solution = try_extract_solution(log_, task_.metric_direction);
    result.phases_completed = promotions_.size();
    result.events = log_.size();
    result.descriptor = descriptor_;
    for (const auto& hit : prefetched_) result.prefetched_task_ids.push_back(hit.entry->task_id);

    if (!descriptor_.empty()) {
        try {
            TaskPromotion promotion = promote_task(descriptor_, task_.task_id, task_.description, log_, ledger_, l2_,
                                                   result.solution, *services_.gen, *services_.embedder,
                                                   *services_.store, migration_);
            if (promotion.warning) warn(*promotion.warning);
            result.wisdom_stored = promotion.entry.has_value();
        } catch (const Error& e) {
            warn(std::string("task promotion skipped: ") + e.what());
        }
    }

    dir_.write_sidecar(log_, ledger_);
    auto rows = compute_trace(log_, ledger_.boundaries(), promotions_);
    result.trace_path = dir_.root() / "trace.csv";
    write_trace_csv(rows, result.trace_path);
    TraceSummary summary = summarize(rows);
    result.peak_context_tokens = summary.hcc_peak;
    result.naive_peak_tokens = summary.naive_peak;
    result.warnings = warnings_;

    nlohmann::json json;
    json["taskId"] = task_.task_id;
    json["task"] = to_json(task_);
    json["config"] = to_json(config_);
    json["recorded"] = services_.usage && services_.usage->recording();
    json["replayed"] = static_cast<bool>(services_.replay);
    json["stopReason"] = to_string(reason);
    json["phasesCompleted"] = result.phases_completed;
    json["events"] = result.events;
    json["boundaries"] = std::vector<EventIndex>(ledger_.boundaries().begin(), ledger_.boundaries().end());
    json["peakContextTokens"] = result.peak_context_tokens;
    json["naivePeakTokens"] = result.naive_peak_tokens;
    json["peakRatio"] = summary.ratio;
    json["descriptor"] = descriptor_;
    json["prefetched"] = result.prefetched_task_ids;
    json["wisdomStored"] = result.wisdom_stored;
    json["warnings"] = result.warnings;
    if (result.solution) {
        json["solution"] = {{"sourceEventIndex", result.solution->source_event_index},
                            {"validationMetric", result.solution->validation_metric},
                            {"metricDirection", to_string(result.solution->metric_direction)},
                            {"submissionProduced", result.solution->submission_produced},
                            {"code", result.solution->code}};
    } else {
        json["solution"] = nullptr;
    }
    dir_.write_result(json);
    return result;
}

RunResult Orchestrator::run() {
    StopReason reason = StopReason::StepLimit;
    try {
        initialize();
        bootstrap();
        while (true) {
            if (budget_->cancelled()) {
                reason = StopReason::Interrupted;
                break;
            }
            if (!step_room(4)) {
                reason = StopReason::StepLimit;
                break;
            }
            if (budget_->exhausted(clock_, "main")) {
                reason = budget_->cancelled() ? StopReason::Interrupted : StopReason::WallClock;
                break;
            }
            PhasePlan plan = propose_plan();
            PhaseOutcome outcome = run_phase(plan);
            if (budget_->cancelled()) {
                reason = StopReason::Interrupted;
                break;
            }
            if (outcome.aborted) {
                reason = StopReason::WallClock;
                break;
            }
            if (!outcome.promoted) {
                reason = StopReason::PromotionFailed;
                break;
            }
        }
    } catch (const Error& e) {
        switch (e.code()) {
            case Errc::BootstrapExhausted: reason = StopReason::BootstrapExhausted; break;
            case Errc::PlanProposalExhausted: reason = StopReason::PlanProposalExhausted; break;
            case Errc::PhaseAborted: reason = StopReason::Interrupted; break;
            default: throw;
        }
        warn(e.what());
    }
    return finalize(reason);
}

RunResult run_task(const TaskSpec& task, const Config& config, RunServices services, const fs::path& run_dir) {
    Orchestrator orchestrator(task, config, std::move(services), run_dir);
    return orchestrator.run();
}

// ---- runtime -------------------------------------------------------------------

namespace {

std::string api_key(const std::string& variable) {
    if (variable.empty()) return {};
    const char* value = std::getenv(variable.c_str());
    if (!value || !*value) fail(Errc::InvalidConfig, "environment variable " + variable + " is not set");
    return value;
}

}  // namespace

Runtime make_runtime(const Config& config, const TaskSpec& task, const fs::path& run_dir, RunMode mode,
                     std::shared_ptr<ReplayLog> replay) {
    Runtime runtime;
    std::error_code ec;
    fs::create_directories(run_dir, ec);
    if (ec) fail(Errc::IoFailure, "cannot create run directory " + run_dir.string() + ": " + ec.message());
    fs::remove(run_dir / "usage.jsonl", ec);

    if (mode == RunMode::Replay) {
        if (!replay) fail(Errc::PreconditionFailed, "replay mode needs a recorded usage log");
        runtime.replay = replay;
        runtime.base_gen = std::make_unique<ReplayBackend>(replay);
        runtime.base_embedder = std::make_unique<ReplayEmbedder>(replay, config.embedding.dimension);
        runtime.base_env = std::make_unique<ReplayEnv>(replay);
    } else {
        const auto& g = config.generation;
        if (g.backend == "scripted") {
            if (g.script.empty()) fail(Errc::InvalidConfig, "generation.backend = scripted needs generation.script");
            runtime.base_gen = ScriptedBackend::load(g.script);
        } else {
            HttpEndpoint endpoint{g.base_url, g.model, api_key(g.api_key_env), config.limits.request_timeout_sec};
            runtime.base_gen = std::make_unique<HttpChatBackend>(endpoint, g.model_overrides, g.temperature);
        }
        const auto& e = config.embedding;
        if (e.backend == "hashing") {
            runtime.base_embedder = std::make_unique<HashingEmbedder>(e.dimension, e.seed);
        } else {
            HttpEndpoint endpoint{e.base_url, e.model, api_key(e.api_key_env), config.limits.request_timeout_sec};
            runtime.base_embedder = std::make_unique<HttpEmbedder>(endpoint, e.dimension);
        }
        if (config.env.kind == "mock") {
            runtime.base_env = MockEnv::load(config.env.table);
        } else {
            ExecutionOptions options;
            options.timeout_sec = config.env.timeout_sec;
            options.interpreter = config.env.interpreter;
            runtime.base_env = std::make_unique<SubprocessEnv>(task.data_dir, run_dir / "workspaces", options,
                                                               config.env.max_concurrent);
        }
    }
    runtime.limited_gen = std::make_unique<LimitedBackend>(*runtime.base_gen, config.limits.max_concurrent_requests);
    runtime.usage = std::make_unique<UsageLedger>(run_dir / "usage.jsonl", mode == RunMode::Record);
    runtime.recording_gen = std::make_unique<RecordingBackend>(*runtime.limited_gen, *runtime.usage);
    runtime.recording_embedder = std::make_unique<RecordingEmbedder>(*runtime.base_embedder, *runtime.usage);
    runtime.recording_env = std::make_unique<RecordingEnv>(*runtime.base_env, *runtime.usage);
    return runtime;
}

}  // namespace hcc
