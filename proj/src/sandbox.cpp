#include "hcc/sandbox.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/stat.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <regex>

#include "hcc/error.hpp"
#include "hcc/text_util.hpp"

extern char** environ;

namespace hcc {

namespace fs = std::filesystem;

namespace {

// Rolling capture of one output stream. Keeps a bounded tail and scans
// complete lines for the metric as they arrive.
class StreamCapture {
public:
    explicit StreamCapture(bool scan_metric) : scan_metric_(scan_metric) {}

    void feed(const char* data, std::size_t size) {
        buffer_.append(data, size);
        for (std::size_t i = 0; i < size; ++i) {
            if (data[i] == '\n') {
                scan(pending_);
                pending_.clear();
            } else if (pending_.size() < kMaxLine) {
                pending_ += data[i];
            }
        }
        if (buffer_.size() > 2 * kKeep) buffer_.erase(0, buffer_.size() - kKeep);
    }

    void finish() {
        scan(pending_);
        pending_.clear();
    }

    const std::string& text() const { return buffer_; }
    std::optional<double> metric() const { return metric_; }

private:
    static constexpr std::size_t kKeep = 1 << 20;
    static constexpr std::size_t kMaxLine = 4096;

    void scan(const std::string& line) {
        if (!scan_metric_ || line.empty()) return;
        if (auto value = parse_metric(line)) metric_ = value;
    }

    bool scan_metric_;
    std::string buffer_;
    std::string pending_;
    std::optional<double> metric_;
};

struct ManifestEntry {
    std::uintmax_t size = 0;
    fs::file_time_type mtime;
    bool directory = false;

    bool operator==(const ManifestEntry&) const = default;
};

using Manifest = std::map<std::string, ManifestEntry>;

Manifest manifest_of(const fs::path& dir) {
    Manifest manifest;
    std::error_code ec;
    if (!fs::exists(dir, ec)) return manifest;
    for (auto it = fs::recursive_directory_iterator(dir, ec); !ec && it != fs::recursive_directory_iterator();
         it.increment(ec)) {
        ManifestEntry entry;
        entry.directory = it->is_directory(ec);
        if (!entry.directory) entry.size = it->file_size(ec);
        entry.mtime = it->last_write_time(ec);
        manifest[fs::relative(it->path(), dir, ec).generic_string()] = entry;
    }
    return manifest;
}

void set_tree_writable(const fs::path& dir, bool writable) {
    std::error_code ec;
    if (!fs::exists(dir, ec)) return;
    auto apply = [&](const fs::path& path, bool directory) {
        auto perms = directory ? (writable ? fs::perms(0755) : fs::perms(0555))
                               : (writable ? fs::perms(0644) : fs::perms(0444));
        fs::permissions(path, perms, fs::perm_options::replace, ec);
    };
    apply(dir, true);
    for (auto it = fs::recursive_directory_iterator(dir, ec); !ec && it != fs::recursive_directory_iterator();
         it.increment(ec)) {
        bool directory = it->is_directory(ec);
        apply(it->path(), directory);
    }
}

void remove_tree(const fs::path& dir) {
    set_tree_writable(dir, true);
    std::error_code ec;
    fs::remove_all(dir, ec);
    if (ec) fail(Errc::IoFailure, "cannot remove " + dir.string() + ": " + ec.message());
}

void copy_input(const fs::path& source, const fs::path& input) {
    std::error_code ec;
    fs::create_directories(input, ec);
    if (ec) fail(Errc::IoFailure, "cannot create " + input.string() + ": " + ec.message());
    fs::copy(source, input, fs::copy_options::recursive | fs::copy_options::overwrite_existing, ec);
    if (ec) fail(Errc::IoFailure, "cannot copy task data into " + input.string() + ": " + ec.message());
    set_tree_writable(input, false);
}

void reset_dir(const fs::path& dir) {
    if (fs::exists(dir)) remove_tree(dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) fail(Errc::IoFailure, "cannot create " + dir.string() + ": " + ec.message());
}

std::string format_seconds(double seconds) {
    std::array<char, 32> buffer{};
    std::snprintf(buffer.data(), buffer.size(), "%.3f", seconds);
    return buffer.data();
}

std::string format_metric(double metric) {
    std::array<char, 32> buffer{};
    std::snprintf(buffer.data(), buffer.size(), "%.10g", metric);
    return buffer.data();
}

}  // namespace

Workspace prepare_workspace(const fs::path& task_data_dir, const fs::path& root) {
    std::error_code ec;
    if (task_data_dir.empty() || !fs::is_directory(task_data_dir, ec))
        fail(Errc::IoFailure, "task data directory not found: " + task_data_dir.string());
    Workspace workspace{root, task_data_dir};
    fs::create_directories(root, ec);
    if (ec) fail(Errc::IoFailure, "cannot create workspace " + root.string() + ": " + ec.message());

    if (!fs::exists(workspace.input()) || manifest_of(workspace.input()).size() != manifest_of(task_data_dir).size()) {
        if (fs::exists(workspace.input())) remove_tree(workspace.input());
        copy_input(task_data_dir, workspace.input());
    }
    reset_dir(workspace.working());
    reset_dir(workspace.submission());
    return workspace;
}

std::string_view to_string(ExitStatus status) noexcept {
    switch (status) {
        case ExitStatus::Success: return "Success";
        case ExitStatus::NonzeroExit: return "NonzeroExit";
        case ExitStatus::Timeout: return "Timeout";
        case ExitStatus::Crashed: return "Crashed";
    }
    return "Success";
}

ExitStatus exit_status_from_string(std::string_view text) {
    for (auto status : {ExitStatus::Success, ExitStatus::NonzeroExit, ExitStatus::Timeout, ExitStatus::Crashed})
        if (to_string(status) == text) return status;
    fail(Errc::InvalidConfig, "unknown exit status '" + std::string(text) + "'");
}

nlohmann::json to_json(const ExecutionReport& report) {
    nlohmann::json json{{"status", to_string(report.exit_status)},
                        {"exitCode", report.exit_code},
                        {"stdout", report.stdout_tail},
                        {"stderr", report.stderr_tail},
                        {"metric", nullptr},
                        {"submission", report.submission_produced},
                        {"durationSec", report.duration_sec},
                        {"inputRestored", report.input_restored}};
    if (report.parsed_metric) json["metric"] = *report.parsed_metric;
    return json;
}

ExecutionReport report_from_json(const nlohmann::json& json) {
    ExecutionReport report;
    report.exit_status = exit_status_from_string(json.value("status", "Success"));
    report.exit_code = json.value("exitCode", report.exit_status == ExitStatus::NonzeroExit ? 1 : 0);
    report.stdout_tail = json.value("stdout", "");
    report.stderr_tail = json.value("stderr", "");
    if (json.contains("metric") && json["metric"].is_number()) report.parsed_metric = json["metric"].get<double>();
    report.submission_produced = json.value("submission", false);
    report.duration_sec = json.value("durationSec", 0.0);
    report.input_restored = json.value("inputRestored", false);
    return report;
}

std::optional<double> parse_metric(std::string_view output) {
    static const std::regex pattern(R"(Validation metric:\s*(-?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?))");
    std::optional<double> found;
    for (const auto& line : text::split_lines(output)) {
        std::smatch match;
        auto begin = line.cbegin();
        while (std::regex_search(begin, line.cend(), match, pattern)) {
            double value = std::strtod(match[1].str().c_str(), nullptr);
            if (std::isfinite(value)) found = value;
            begin = match[0].second;
        }
    }
    return found;
}

ExecutionReport execute(const Workspace& workspace, std::string_view code, const ExecutionOptions& options) {
    std::error_code ec;
    if (!fs::is_directory(workspace.working(), ec) || !fs::is_directory(workspace.submission(), ec))
        fail(Errc::PreconditionFailed, "workspace not prepared: " + workspace.root.string());

    const fs::path script = workspace.working() / options.script_name;
    {
        std::ofstream out(script, std::ios::binary | std::ios::trunc);
        out << code;
        if (!out) fail(Errc::IoFailure, "cannot write " + script.string());
    }
    fs::remove(workspace.submission_file(), ec);
    const Manifest before = manifest_of(workspace.input());

    // Everything the child needs is prepared before fork.
    const std::string script_arg = (fs::path("working") / options.script_name).string();
    const std::string root = workspace.root.string();
    std::vector<std::string> env_storage{"PYTHONUNBUFFERED=1"};
    for (char** entry = environ; *entry; ++entry)
        if (std::strncmp(*entry, "PYTHONUNBUFFERED=", 17) != 0) env_storage.emplace_back(*entry);
    std::vector<char*> envp;
    for (auto& entry : env_storage) envp.push_back(entry.data());
    envp.push_back(nullptr);
    std::string interpreter = options.interpreter;
    std::string script_copy = script_arg;
    std::array<char*, 3> argv{interpreter.data(), script_copy.data(), nullptr};

    int out_pipe[2], err_pipe[2], status_pipe[2];
    if (pipe2(out_pipe, O_CLOEXEC) != 0) fail(Errc::SandboxFailure, std::string("pipe: ") + std::strerror(errno));
    if (pipe2(err_pipe, O_CLOEXEC) != 0) {
        close(out_pipe[0]);
        close(out_pipe[1]);
        fail(Errc::SandboxFailure, std::string("pipe: ") + std::strerror(errno));
    }
    if (pipe2(status_pipe, O_CLOEXEC) != 0) {
        for (int fd : {out_pipe[0], out_pipe[1], err_pipe[0], err_pipe[1]}) close(fd);
        fail(Errc::SandboxFailure, std::string("pipe: ") + std::strerror(errno));
    }

    const auto started = std::chrono::steady_clock::now();
    pid_t pid = fork();
    if (pid < 0) {
        for (int fd : {out_pipe[0], out_pipe[1], err_pipe[0], err_pipe[1], status_pipe[0], status_pipe[1]}) close(fd);
        fail(Errc::SandboxFailure, std::string("fork: ") + std::strerror(errno));
    }
    if (pid == 0) {
        setpgid(0, 0);
        int devnull = open("/dev/null", O_RDONLY);
        if (devnull >= 0) dup2(devnull, STDIN_FILENO);
        dup2(out_pipe[1], STDOUT_FILENO);
        dup2(err_pipe[1], STDERR_FILENO);
        int err = 0;
        if (chdir(root.c_str()) != 0) {
            err = errno;
        } else {
            execvpe(argv[0], argv.data(), envp.data());
            err = errno;
        }
        ssize_t ignored = write(status_pipe[1], &err, sizeof err);
        (void)ignored;
        _exit(127);
    }
    setpgid(pid, pid);
    close(out_pipe[1]);
    close(err_pipe[1]);
    close(status_pipe[1]);

    int spawn_errno = 0;
    ssize_t got = read(status_pipe[0], &spawn_errno, sizeof spawn_errno);
    close(status_pipe[0]);
    if (got == static_cast<ssize_t>(sizeof spawn_errno)) {
        int status = 0;
        waitpid(pid, &status, 0);
        close(out_pipe[0]);
        close(err_pipe[0]);
        fail(Errc::SandboxFailure, "cannot start " + options.interpreter + ": " + std::strerror(spawn_errno));
    }

    StreamCapture out_capture(true), err_capture(false);
    const auto deadline =
        started + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                      std::chrono::duration<double>(options.timeout_sec));
    bool timed_out = false;
    bool reaped = false;
    int wait_status = 0;
    std::optional<std::chrono::steady_clock::time_point> drain_until;
    std::array<pollfd, 2> fds{{{out_pipe[0], POLLIN, 0}, {err_pipe[0], POLLIN, 0}}};
    std::array<char, 65536> buffer{};

    while (fds[0].fd >= 0 || fds[1].fd >= 0 || !reaped) {
        auto now = std::chrono::steady_clock::now();
        if (!timed_out && !reaped && now >= deadline) {
            timed_out = true;
            kill(-pid, SIGKILL);
        }
        if (!reaped) {
            pid_t done = waitpid(pid, &wait_status, WNOHANG);
            if (done == pid) {
                reaped = true;
                // Stray grandchildren holding the pipes open are not waited for.
                kill(-pid, SIGKILL);
                drain_until = std::chrono::steady_clock::now() + std::chrono::milliseconds(500);
            }
        }
        if (drain_until && std::chrono::steady_clock::now() > *drain_until) break;
        if (fds[0].fd < 0 && fds[1].fd < 0) {
            if (!reaped) {
                if (timed_out) {
                    waitpid(pid, &wait_status, 0);
                    reaped = true;
                } else {
                    poll(nullptr, 0, 10);
                }
            }
            continue;
        }
        int ready = poll(fds.data(), fds.size(), 50);
        if (ready < 0 && errno != EINTR) break;
        for (std::size_t s = 0; s < fds.size(); ++s) {
            if (fds[s].fd < 0 || !(fds[s].revents & (POLLIN | POLLHUP | POLLERR))) continue;
            ssize_t n = read(fds[s].fd, buffer.data(), buffer.size());
            if (n > 0) {
                (s == 0 ? out_capture : err_capture).feed(buffer.data(), static_cast<std::size_t>(n));
            } else if (n == 0 || (errno != EINTR && errno != EAGAIN)) {
                close(fds[s].fd);
                fds[s].fd = -1;
            }
        }
    }
    for (auto& fd : fds)
        if (fd.fd >= 0) close(fd.fd);
    if (!reaped) waitpid(pid, &wait_status, 0);
    out_capture.finish();
    err_capture.finish();

    ExecutionReport report;
    report.duration_sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    if (timed_out) {
        report.exit_status = ExitStatus::Timeout;
        report.exit_code = -SIGKILL;
    } else if (WIFEXITED(wait_status)) {
        report.exit_code = WEXITSTATUS(wait_status);
        report.exit_status = report.exit_code == 0 ? ExitStatus::Success : ExitStatus::NonzeroExit;
    } else {
        report.exit_status = ExitStatus::Crashed;
        report.exit_code = WIFSIGNALED(wait_status) ? -WTERMSIG(wait_status) : -1;
    }
    report.stdout_tail = text::keep_tail(out_capture.text(), options.tail_lines, options.tail_chars);
    report.stderr_tail = text::keep_tail(err_capture.text(), options.tail_lines, options.tail_chars);
    report.parsed_metric = out_capture.metric();
    report.submission_produced = fs::is_regular_file(workspace.submission_file(), ec);

    if (manifest_of(workspace.input()) != before) {
        remove_tree(workspace.input());
        copy_input(workspace.source, workspace.input());
        report.input_restored = true;
    }
    return report;
}

std::string render_report(const ExecutionReport& report) {
    std::string out;
    switch (report.exit_status) {
        case ExitStatus::Success: out = "EXECUTION SUCCEEDED"; break;
        case ExitStatus::NonzeroExit:
            out = "EXECUTION FAILED (exit code " + std::to_string(report.exit_code) + ")";
            break;
        case ExitStatus::Timeout: out = "EXECUTION TIMED OUT"; break;
        case ExitStatus::Crashed: out = "EXECUTION CRASHED (signal " + std::to_string(-report.exit_code) + ")"; break;
    }
    out += "\nduration: " + format_seconds(report.duration_sec) + "s";
    out += "\nvalidation metric: " + (report.parsed_metric ? format_metric(*report.parsed_metric) : "not reported");
    out += std::string("\nsubmission: ") + (report.submission_produced ? "produced" : "missing");
    if (report.input_restored) out += "\nwarning: input/ was modified by the script and has been restored";
    if (!report.stdout_tail.empty()) out += "\n--- stdout (tail) ---\n" + report.stdout_tail;
    if (!report.stderr_tail.empty()) out += "\n--- stderr (tail) ---\n" + report.stderr_tail;
    return out;
}

Event report_to_event(const ExecutionReport& report, ThreadTag thread) {
    Event event;
    event.origin = Origin::Environment;
    event.kind = EventKind::TerminalOutput;
    event.payload = render_report(report);
    event.thread = thread;
    event.token_estimate = default_token_estimate(event.payload);
    event.metric = report.parsed_metric;
    event.submission_produced = report.submission_produced;
    return event;
}

// ---- environments ----------------------------------------------------------

SubprocessEnv::SubprocessEnv(fs::path task_data_dir, fs::path workspaces_root, ExecutionOptions defaults,
                             std::size_t max_concurrent)
    : task_data_dir_(std::move(task_data_dir)),
      workspaces_root_(std::move(workspaces_root)),
      defaults_(std::move(defaults)),
      slots_(std::max<std::size_t>(1, max_concurrent)) {}

Workspace SubprocessEnv::prepare(const std::string& label) {
    return prepare_workspace(task_data_dir_, workspaces_root_ / label);
}

ExecutionReport SubprocessEnv::run(Workspace& workspace, std::string_view code, const std::string& script_name,
                                   const std::string&) {
    ExecutionOptions options = defaults_;
    options.script_name = script_name;
    slots_.acquire();
    struct Release {
        Semaphore& s;
        ~Release() { s.release(); }
    } release{slots_};
    return execute(workspace, code, options);
}

MockEnv::MockEnv(std::vector<Rule> rules, std::optional<ExecutionReport> fallback)
    : rules_(std::move(rules)), fallback_(std::move(fallback)) {}

std::unique_ptr<MockEnv> MockEnv::from_json(const nlohmann::json& table) {
    try {
        std::vector<Rule> rules;
        for (const auto& item : table.at("rules")) {
            Rule rule{item.at("marker").get<std::string>(), report_from_json(item)};
            if (rule.marker.empty()) fail(Errc::InvalidConfig, "mock rule with empty marker");
            rules.push_back(std::move(rule));
        }
        std::optional<ExecutionReport> fallback;
        if (table.contains("fallback")) fallback = report_from_json(table["fallback"]);
        return std::make_unique<MockEnv>(std::move(rules), std::move(fallback));
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::InvalidConfig, std::string("malformed mock table: ") + e.what());
    }
}

std::unique_ptr<MockEnv> MockEnv::load(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::InvalidConfig, "cannot read mock table " + path.string());
    try {
        return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        fail(Errc::InvalidConfig, path.string() + ": " + e.what());
    }
}

Workspace MockEnv::prepare(const std::string& label) { return Workspace{fs::path("mock") / label, {}}; }

ExecutionReport MockEnv::run(Workspace&, std::string_view code, const std::string& script_name,
                             const std::string&) {
    {
        std::lock_guard lock(mutex_);
        ++runs_;
    }
    for (const auto& rule : rules_)
        if (code.find(rule.marker) != std::string_view::npos) return rule.report;
    if (fallback_) return *fallback_;
    ExecutionReport report;
    report.exit_status = ExitStatus::NonzeroExit;
    report.exit_code = 1;
    report.stderr_tail = "mock environment: no rule matches " + script_name;
    return report;
}

std::size_t MockEnv::runs() const {
    std::lock_guard lock(mutex_);
    return runs_;
}

ExecutionReport RecordingEnv::run(Workspace& workspace, std::string_view code, const std::string& script_name,
                                  const std::string& thread) {
    const std::uint64_t seq = ledger_.next_sequence("execution", thread);
    ExecutionReport report = inner_.run(workspace, code, script_name, thread);
    nlohmann::json line{{"type", "execution"},
                        {"thread", thread},
                        {"seq", seq},
                        {"script", script_name},
                        {"status", to_string(report.exit_status)},
                        {"durationSec", report.duration_sec}};
    if (ledger_.recording()) line["report"] = to_json(report);
    ledger_.append(line);
    return report;
}

Workspace ReplayEnv::prepare(const std::string& label) { return Workspace{fs::path("replay") / label, {}}; }

ExecutionReport ReplayEnv::run(Workspace&, std::string_view, const std::string&, const std::string& thread) {
    const std::uint64_t seq = log_->next_sequence("execution", thread);
    const nlohmann::json* entry = log_->find("execution", thread, seq);
    if (!entry || !entry->contains("report"))
        fail(Errc::ScriptExhausted, "no recorded execution #" + std::to_string(seq) + " on " + thread);
    return report_from_json((*entry)["report"]);
}

}  // namespace hcc
