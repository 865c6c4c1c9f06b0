#pragma once

// Execution environment S: isolated workspaces, subprocess execution with a
// wall-clock limit, and conversion of results into TerminalOutput events.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "hcc/event_log.hpp"
#include "hcc/llm_gateway.hpp"
#include "hcc/recording.hpp"

namespace hcc {

/// root/{input, working, submission}. input/ is a read-only copy of the task
/// data and is restored if an execution changes it.
struct Workspace {
    std::filesystem::path root;
    std::filesystem::path source;

    std::filesystem::path input() const { return root / "input"; }
    std::filesystem::path working() const { return root / "working"; }
    std::filesystem::path submission() const { return root / "submission"; }
    std::filesystem::path submission_file() const { return submission() / "submission.csv"; }
};

/// Creates (or resets) the layout under `root` from `task_data_dir`.
/// Re-preparing clears working/ and submission/ and leaves input/ intact.
/// Throws IoFailure.
Workspace prepare_workspace(const std::filesystem::path& task_data_dir, const std::filesystem::path& root);

enum class ExitStatus { Success, NonzeroExit, Timeout, Crashed };

std::string_view to_string(ExitStatus status) noexcept;
ExitStatus exit_status_from_string(std::string_view text);

struct ExecutionReport {
    ExitStatus exit_status = ExitStatus::Success;
    int exit_code = 0;
    std::string stdout_tail;
    std::string stderr_tail;
    std::optional<double> parsed_metric;
    bool submission_produced = false;
    double duration_sec = 0.0;
    bool input_restored = false;

    bool operator==(const ExecutionReport&) const = default;
};

nlohmann::json to_json(const ExecutionReport& report);
ExecutionReport report_from_json(const nlohmann::json& json);

struct ExecutionOptions {
    double timeout_sec = 3600.0;
    std::string interpreter = "python3";
    /// File name under working/.
    std::string script_name = "solution.py";
    std::size_t tail_lines = 200;
    std::size_t tail_chars = 16000;
};

/// Last `Validation metric: <number>` line wins; non-finite values are ignored.
std::optional<double> parse_metric(std::string_view output);

/// Runs the script as a subprocess with cwd = workspace root, killing its
/// process group at the timeout. A failing script is a report, not an error;
/// throws SandboxFailure only when the process cannot be spawned.
ExecutionReport execute(const Workspace& workspace, std::string_view code, const ExecutionOptions& options);

/// "EXECUTION SUCCEEDED" / "EXECUTION FAILED (exit code N)" /
/// "EXECUTION TIMED OUT" / "EXECUTION CRASHED (signal N)" header, then
/// duration, metric, submission and output tails.
std::string render_report(const ExecutionReport& report);

/// Environment-origin TerminalOutput carrying the report's metric and
/// submission flags. Index and token estimate are left for the log to set.
Event report_to_event(const ExecutionReport& report, ThreadTag thread = ThreadTag::main());

// ---- environments --------------------------------------------------------

class Environment {
public:
    virtual ~Environment() = default;
    /// Workspace for one logical thread ("main", "p1.d2.s1").
    virtual Workspace prepare(const std::string& label) = 0;
    virtual ExecutionReport run(Workspace& workspace, std::string_view code, const std::string& script_name,
                                const std::string& thread) = 0;
};

/// Real subprocess execution; a shared semaphore caps concurrent scripts.
class SubprocessEnv : public Environment {
public:
    SubprocessEnv(std::filesystem::path task_data_dir, std::filesystem::path workspaces_root,
                  ExecutionOptions defaults, std::size_t max_concurrent);

    Workspace prepare(const std::string& label) override;
    ExecutionReport run(Workspace& workspace, std::string_view code, const std::string& script_name,
                        const std::string& thread) override;

private:
    std::filesystem::path task_data_dir_;
    std::filesystem::path workspaces_root_;
    ExecutionOptions defaults_;
    Semaphore slots_;
};

/// Scripted table: the first rule whose marker occurs in the code decides
/// the report; `fallback` applies when none matches.
///   {"rules": [{"marker", "status", "exitCode", "metric", "submission",
///               "stdout", "stderr", "durationSec"}], "fallback": {...}}
class MockEnv : public Environment {
public:
    struct Rule {
        std::string marker;
        ExecutionReport report;
    };

    explicit MockEnv(std::vector<Rule> rules, std::optional<ExecutionReport> fallback = std::nullopt);
    static std::unique_ptr<MockEnv> from_json(const nlohmann::json& table);
    static std::unique_ptr<MockEnv> load(const std::filesystem::path& path);

    Workspace prepare(const std::string& label) override;
    ExecutionReport run(Workspace& workspace, std::string_view code, const std::string& script_name,
                        const std::string& thread) override;

    std::size_t runs() const;

private:
    std::vector<Rule> rules_;
    std::optional<ExecutionReport> fallback_;
    mutable std::mutex mutex_;
    std::size_t runs_ = 0;
};

/// Writes each report to the usage ledger (full report in record mode).
class RecordingEnv : public Environment {
public:
    RecordingEnv(Environment& inner, UsageLedger& ledger) : inner_(inner), ledger_(ledger) {}

    Workspace prepare(const std::string& label) override { return inner_.prepare(label); }
    ExecutionReport run(Workspace& workspace, std::string_view code, const std::string& script_name,
                        const std::string& thread) override;

private:
    Environment& inner_;
    UsageLedger& ledger_;
};

/// Serves recorded reports by (thread, per-thread sequence).
class ReplayEnv : public Environment {
public:
    explicit ReplayEnv(std::shared_ptr<ReplayLog> log) : log_(std::move(log)) {}

    Workspace prepare(const std::string& label) override;
    ExecutionReport run(Workspace& workspace, std::string_view code, const std::string& script_name,
                        const std::string& thread) override;

private:
    std::shared_ptr<ReplayLog> log_;
};

}  // namespace hcc
