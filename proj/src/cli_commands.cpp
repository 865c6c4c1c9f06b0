#include "hcc/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "hcc/error.hpp"
#include "hcc/orchestrator.hpp"
#include "hcc/text_util.hpp"
#include "hcc/trace.hpp"

namespace hcc {

namespace fs = std::filesystem;

namespace {

int exit_for(const Error& e) {
    switch (e.code()) {
        case Errc::InvalidConfig:
        case Errc::IoFailure:
        case Errc::CorruptStore:
        case Errc::CorruptRun:
        case Errc::DimensionMismatch:
        case Errc::UnknownTask:
        case Errc::PreconditionFailed:
            return exit_code::kUsage;
        default:
            return exit_code::kAborted;
    }
}

int exit_for(StopReason reason) {
    switch (reason) {
        case StopReason::StepLimit:
        case StopReason::WallClock: return exit_code::kOk;
        case StopReason::Interrupted: return exit_code::kInterrupted;
        default: return exit_code::kAborted;
    }
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::IoFailure, "cannot read " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

fs::path store_dir_for(const Config& config) { return config.store.empty() ? fs::path("wisdom-store") : config.store; }

fs::path run_dir_for(const Config& config, const Overrides& overrides, const std::string& task_id) {
    if (overrides.run_dir) return *overrides.run_dir;
    if (!config.run.dir.empty()) return config.run.dir;
    return fs::path("runs") / task_id;
}

std::unique_ptr<Embedder> embedder_for(const Config& config) {
    const auto& e = config.embedding;
    if (e.backend == "hashing") return std::make_unique<HashingEmbedder>(e.dimension, e.seed);
    const char* key = e.api_key_env.empty() ? "" : std::getenv(e.api_key_env.c_str());
    if (!e.api_key_env.empty() && (!key || !*key))
        fail(Errc::InvalidConfig, "environment variable " + e.api_key_env + " is not set");
    return std::make_unique<HttpEmbedder>(HttpEndpoint{e.base_url, e.model, key ? key : "", config.limits.request_timeout_sec},
                                          e.dimension);
}

std::string fixed(double value, int digits) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(digits) << value;
    return out.str();
}

void print_result(const RunResult& result, const fs::path& run_dir, std::ostream& out, std::ostream& err) {
    for (const auto& warning : result.warnings) err << "warning: " << warning << '\n';
    out << "run directory: " << run_dir.string() << '\n';
    out << "stop reason: " << to_string(result.stop_reason) << '\n';
    out << "phases completed: " << result.phases_completed << ", events: " << result.events << '\n';
    if (result.solution) {
        out << "best validation metric: " << result.solution->validation_metric << " (event "
            << result.solution->source_event_index << ")\n";
    } else {
        out << "best validation metric: none\n";
    }
    const double ratio = result.naive_peak_tokens == 0
                             ? 1.0
                             : static_cast<double>(result.peak_context_tokens) / static_cast<double>(result.naive_peak_tokens);
    out << "peak context tokens: " << result.peak_context_tokens << " (naive " << result.naive_peak_tokens << ", ratio "
        << fixed(ratio, 3) << ")\n";
    if (!result.prefetched_task_ids.empty())
        out << "prior wisdom from: " << text::join(result.prefetched_task_ids, ", ") << '\n';
    out << "wisdom stored: " << (result.wisdom_stored ? "yes" : "no") << '\n';
}

// Everything needed to re-create a run's inputs; written before the run starts.
void write_manifest(const fs::path& run_dir, const fs::path& task_dir, const fs::path& config_path, const Config& config) {
    nlohmann::json manifest{{"taskDir", fs::absolute(task_dir).lexically_normal().string()},
                            {"configDir", fs::absolute(config_path).parent_path().lexically_normal().string()},
                            {"config", to_json(config)}};
    std::ofstream out(run_dir / "run.json", std::ios::binary | std::ios::trunc);
    out << manifest.dump(2) << '\n';
    if (!out) fail(Errc::IoFailure, "cannot write " + (run_dir / "run.json").string());
}

RunServices services_for(Runtime& runtime, WisdomRepository& store, const std::atomic<bool>* cancel) {
    RunServices services;
    services.gen = &runtime.gen();
    services.embedder = &runtime.embedder();
    services.env = &runtime.env();
    services.store = &store;
    services.usage = runtime.usage.get();
    services.replay = runtime.replay;
    services.cancel = cancel;
    return services;
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> lines;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
}

// Index of the first differing line, or nullopt when equal.
std::optional<std::size_t> first_difference(const std::string& a, const std::string& b) {
    if (a == b) return std::nullopt;
    auto left = lines_of(a);
    auto right = lines_of(b);
    std::size_t n = 0;
    while (n < left.size() && n < right.size() && left[n] == right[n]) ++n;
    return n;
}

}  // namespace

Config load_config_with(const fs::path& config_path, const Overrides& overrides) {
    Config config = load_config(config_path);
    const fs::path cwd = fs::current_path();
    auto set = [&](const std::string& key, const std::string& value) { apply_config_value(config, key, value, cwd); };
    if (overrides.store) set("store.path", overrides.store->string());
    if (overrides.seed) set("run.seed", std::to_string(*overrides.seed));
    if (overrides.budget_sec) {
        std::ostringstream value;
        value << std::setprecision(17) << *overrides.budget_sec;
        set("run.wallClockBudgetSec", value.str());
    }
    if (overrides.step_limit) set("run.stepLimit", std::to_string(*overrides.step_limit));
    if (overrides.delta) {
        std::ostringstream value;
        value << std::setprecision(17) << *overrides.delta;
        set("run.delta", value.str());
    }
    if (overrides.workers) set("run.workerLimit", std::to_string(*overrides.workers));
    validate(config);
    return config;
}

int cmd_run(const fs::path& task_dir, const fs::path& config_path, const Overrides& overrides, std::ostream& out,
            std::ostream& err, const std::atomic<bool>* cancel) {
    try {
        Config config = load_config_with(config_path, overrides);
        TaskSpec task = load_task(task_dir, config);
        const fs::path run_dir = run_dir_for(config, overrides, task.task_id);
        Runtime runtime = make_runtime(config, task, run_dir, overrides.record ? RunMode::Record : RunMode::Normal);
        write_manifest(run_dir, task_dir, config_path, config);
        const fs::path store_dir = store_dir_for(config);
        WisdomRepository store(open_or_create(store_dir, runtime.embedder().dimension()), store_dir);
        RunResult result = run_task(task, config, services_for(runtime, store, cancel), run_dir);
        print_result(result, run_dir, out, err);
        return exit_for(result.stop_reason);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_for(e);
    }
}

int cmd_warm(const fs::path& corpus_dir, const fs::path& config_path, const Overrides& overrides, std::ostream& out,
             std::ostream& err, const std::atomic<bool>* cancel) {
    Config config;
    std::vector<fs::path> tasks;
    try {
        config = load_config_with(config_path, overrides);
        std::error_code ec;
        if (!fs::is_directory(corpus_dir, ec)) fail(Errc::IoFailure, "corpus directory not found: " + corpus_dir.string());
        for (const auto& entry : fs::directory_iterator(corpus_dir))
            if (entry.is_directory() && fs::exists(entry.path() / "description.md")) tasks.push_back(entry.path());
        std::sort(tasks.begin(), tasks.end());
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_for(e);
    }

    const fs::path store_dir = store_dir_for(config);
    const fs::path runs_root = overrides.run_dir ? *overrides.run_dir
                               : config.run.dir.empty() ? fs::path("runs") / "warm"
                                                         : config.run.dir;
    std::size_t added = 0, skipped = 0, failed = 0;
    std::unique_ptr<WisdomRepository> store;
    try {
        auto embedder = embedder_for(config);
        store = std::make_unique<WisdomRepository>(open_or_create(store_dir, embedder->dimension()), store_dir);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_for(e);
    }

    for (const auto& task_dir : tasks) {
        if (cancel && cancel->load()) {
            err << "interrupted; " << added << " task(s) added so far\n";
            return exit_code::kInterrupted;
        }
        try {
            TaskSpec task = load_task(task_dir, config);
            if (store->snapshot().find(task.task_id)) {
                ++skipped;
                out << task.task_id << ": already stored, skipped\n";
                continue;
            }
            const fs::path run_dir = runs_root / task.task_id;
            Runtime runtime = make_runtime(config, task, run_dir, overrides.record ? RunMode::Record : RunMode::Normal);
            bool stored = false;
            if (config.warm_fast_mode) {
                // Wisdom from the task text alone: descriptor, then P2 over an empty history.
                MigrationOptions options;
                options.format_attempts = config.run.format_attempts;
                options.per_event_cap = config.run.per_event_truncation_cap;
                options.timeout_sec = config.limits.request_timeout_sec;
                const std::string descriptor = generate_descriptor(task.description, runtime.gen(), options);
                EventLog log;
                PhaseLedger ledger;
                L2Store l2;
                TaskPromotion promotion = promote_task(descriptor, task.task_id, task.description, log, ledger, l2,
                                                       std::nullopt, runtime.gen(), runtime.embedder(), *store, options);
                if (promotion.warning) err << task.task_id << ": warning: " << *promotion.warning << '\n';
                stored = promotion.entry.has_value();
            } else {
                RunServices services = services_for(runtime, *store, cancel);
                RunResult result = run_task(task, config, std::move(services), run_dir);
                for (const auto& warning : result.warnings) err << task.task_id << ": warning: " << warning << '\n';
                stored = result.wisdom_stored;
            }
            if (stored) {
                ++added;
                out << task.task_id << ": stored\n";
            } else {
                ++failed;
                out << task.task_id << ": no wisdom stored\n";
            }
        } catch (const Error& e) {
            ++failed;
            err << task_dir.filename().string() << ": failed: " << e.what() << '\n';
        }
    }
    out << "warm: " << added << " added, " << skipped << " skipped, " << failed << " failed; store holds "
        << store->snapshot().size() << " entries\n";
    return exit_code::kOk;
}

int cmd_trace(const fs::path& run_dir, std::ostream& out, std::ostream& err) {
    try {
        TraceSummary summary = trace_run_directory(run_dir);
        out << "trace: " << summary.rows << " rows written to " << (run_dir / "trace.csv").string() << '\n';
        out << "peak naive tokens: " << summary.naive_peak << ", peak hcc tokens: " << summary.hcc_peak
            << ", ratio: " << fixed(summary.ratio, 4) << '\n';
        return exit_code::kOk;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_for(e);
    }
}

int cmd_store_list(const fs::path& store_dir, std::ostream& out, std::ostream& err) {
    try {
        WisdomStore store = load_wisdom_store(store_dir);
        out << "store " << store_dir.string() << ": " << store.size() << " entries, dimension " << store.dimension()
            << ", version " << store.version() << '\n';
        for (const auto& entry : store.entries()) {
            std::string summary = entry.descriptor.substr(0, 80);
            if (entry.descriptor.size() > 80) summary += "...";
            out << entry.task_id << '\t' << summary << '\n';
        }
        return exit_code::kOk;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_for(e);
    }
}

int cmd_store_show(const fs::path& store_dir, const std::optional<std::string>& task_id,
                   const std::optional<std::string>& query, const std::optional<fs::path>& config_path,
                   std::ostream& out, std::ostream& err) {
    try {
        WisdomStore store = load_wisdom_store(store_dir);
        std::vector<const WisdomEntry*> selected;
        if (task_id) {
            const WisdomEntry* entry = store.find(*task_id);
            if (!entry) fail(Errc::UnknownTask, "no entry for task '" + *task_id + "'");
            selected.push_back(entry);
        } else {
            for (const auto& entry : store.entries()) selected.push_back(&entry);
        }
        std::vector<double> similarity(selected.size(), 0.0);
        if (query) {
            Config config;
            if (config_path) config = load_config(*config_path);
            config.embedding.dimension = config_path ? config.embedding.dimension : store.dimension();
            auto embedder = embedder_for(config);
            Vector q = embed(*embedder, *query);
            for (std::size_t n = 0; n < selected.size(); ++n) similarity[n] = cosine(q, selected[n]->embedding);
            std::vector<std::size_t> order(selected.size());
            for (std::size_t n = 0; n < order.size(); ++n) order[n] = n;
            std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return similarity[a] > similarity[b]; });
            std::vector<const WisdomEntry*> sorted_entries;
            std::vector<double> sorted_similarity;
            for (auto n : order) {
                sorted_entries.push_back(selected[n]);
                sorted_similarity.push_back(similarity[n]);
            }
            selected = std::move(sorted_entries);
            similarity = std::move(sorted_similarity);
            out << "cosine\ttaskId\n";
            for (std::size_t n = 0; n < selected.size(); ++n)
                out << fixed(similarity[n], 4) << '\t' << selected[n]->task_id << '\n';
            out << '\n';
        }
        for (std::size_t n = 0; n < selected.size(); ++n) {
            out << "== " << selected[n]->task_id;
            if (query) out << " (cosine " << fixed(similarity[n], 4) << ")";
            out << "\ndescriptor: " << selected[n]->descriptor << "\n\n" << selected[n]->wisdom << "\n\n";
        }
        return exit_code::kOk;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_for(e);
    }
}

int cmd_store_delete(const fs::path& store_dir, const std::string& task_id, bool confirmed, std::ostream& out,
                     std::ostream& err) {
    if (!confirmed) {
        err << "error: refusing to delete '" << task_id << "' without --yes\n";
        return exit_code::kUsage;
    }
    try {
        WisdomRepository store(load_wisdom_store(store_dir), store_dir);
        store.erase(task_id);
        out << "deleted " << task_id << '\n';
        return exit_code::kOk;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_for(e);
    }
}

int cmd_replay(const fs::path& run_dir, std::ostream& out, std::ostream& err, const fs::path& scratch_dir) {
    fs::path scratch = scratch_dir;
    bool temporary = false;
    try {
        const fs::path manifest_path = run_dir / "run.json";
        if (!fs::exists(manifest_path)) fail(Errc::CorruptRun, "no run.json in " + run_dir.string());
        nlohmann::json manifest;
        try {
            manifest = nlohmann::json::parse(read_text(manifest_path));
        } catch (const nlohmann::json::exception& e) {
            fail(Errc::CorruptRun, "run.json is not JSON: " + std::string(e.what()));
        }
        auto replay = ReplayLog::load(run_dir / "usage.jsonl");
        if (!replay->has_recorded_responses())
            fail(Errc::PreconditionFailed, "no recorded responses in " + (run_dir / "usage.jsonl").string() +
                                               " (run with --record)");

        Config config;
        const fs::path config_dir = manifest.at("configDir").get<std::string>();
        for (const auto& [key, value] : manifest.at("config").items())
            apply_config_value(config, key, value.get<std::string>(), config_dir);
        validate(config);
        TaskSpec task = load_task(manifest.at("taskDir").get<std::string>(), config);

        const std::string archived_events = read_text(run_dir / "events.jsonl");
        const EventLog archive = read_events_jsonl(run_dir / "events.jsonl");
        std::vector<std::int64_t> stamps;
        for (const auto& event : archive.events()) stamps.push_back(event.wall_clock_ms);

        if (scratch.empty()) {
            std::random_device rd;
            scratch = fs::temp_directory_path() / ("hcc-replay-" + std::to_string(rd()));
            temporary = true;
        }
        Runtime runtime = make_runtime(config, task, scratch, RunMode::Replay, replay);
        WisdomRepository store(WisdomStore(config.embedding.dimension), std::nullopt);
        RunServices services = services_for(runtime, store, nullptr);
        services.archived_stamps = std::move(stamps);

        std::optional<std::string> replay_error;
        try {
            run_task(task, config, std::move(services), scratch);
        } catch (const Error& e) {
            replay_error = e.what();
        }

        std::string replayed_events;
        if (fs::exists(scratch / "events.jsonl")) replayed_events = read_text(scratch / "events.jsonl");
        if (auto index = first_difference(archived_events, replayed_events)) {
            std::string message = "event log diverges at index " + std::to_string(*index);
            if (replay_error) message += " (" + *replay_error + ")";
            fail(Errc::ReplayDivergence, message);
        }
        if (replay_error) fail(Errc::ReplayDivergence, "replay stopped early: " + *replay_error);
        if (fs::exists(run_dir / "trace.csv")) {
            const std::string archived_trace = read_text(run_dir / "trace.csv");
            const std::string replayed_trace = read_text(scratch / "trace.csv");
            if (auto row = first_difference(archived_trace, replayed_trace))
                fail(Errc::ReplayDivergence, "trace.csv diverges at line " + std::to_string(*row + 1));
        }
        out << "replay: " << archive.size() << " events identical";
        if (fs::exists(run_dir / "trace.csv")) out << ", trace.csv identical";
        out << '\n';
        if (temporary) fs::remove_all(scratch);
        return exit_code::kOk;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        if (temporary) {
            std::error_code ec;
            fs::remove_all(scratch, ec);
        }
        return exit_for(e);
    } catch (const nlohmann::json::exception& e) {
        err << "error: malformed run.json: " << e.what() << '\n';
        return exit_code::kUsage;
    }
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err, const std::atomic<bool>* cancel) {
    CLI::App app{"hcc: hierarchical cognitive caching agent for ML engineering tasks"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "hcc 0.1.0");

    Overrides overrides;
    fs::path config_path;
    std::optional<std::string> store_path;
    std::optional<std::uint64_t> seed;
    std::optional<double> budget_sec;
    std::optional<std::size_t> step_limit;
    std::optional<double> delta;
    std::optional<std::size_t> workers;
    std::optional<std::string> run_dir_flag;

    auto add_run_flags = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "Config file")->required()->check(CLI::ExistingFile);
        cmd->add_option("--store", store_path, "Wisdom store directory");
        cmd->add_option("--seed", seed, "Seed passed to model requests");
        cmd->add_flag("--record", overrides.record, "Record full model responses for replay");
        cmd->add_option("--budget-sec", budget_sec, "Wall-clock budget in seconds")->check(CLI::NonNegativeNumber);
        cmd->add_option("--step-limit", step_limit, "Maximum number of events");
        cmd->add_option("--delta", delta, "Prefetch similarity threshold");
        cmd->add_option("--workers", workers, "Concurrent trajectories")->check(CLI::PositiveNumber);
        cmd->add_option("--run-dir", run_dir_flag, "Run directory (default runs/<taskId>)");
    };

    fs::path task_dir;
    auto* run = app.add_subcommand("run", "Solve one task");
    run->add_option("task_dir", task_dir, "Task directory")->required();
    add_run_flags(run);

    fs::path corpus_dir;
    auto* warm = app.add_subcommand("warm", "Populate the wisdom store from a corpus of tasks");
    warm->add_option("corpus_dir", corpus_dir, "Directory of task directories")->required();
    add_run_flags(warm);

    fs::path trace_dir;
    auto* trace = app.add_subcommand("trace", "Recompute a run's context-length trace");
    trace->add_option("run_dir", trace_dir, "Run directory")->required();

    fs::path replay_dir;
    auto* replay = app.add_subcommand("replay", "Re-execute a recorded run and compare artifacts");
    replay->add_option("run_dir", replay_dir, "Run directory")->required();

    fs::path store_dir = "wisdom-store";
    auto* store = app.add_subcommand("store", "Inspect the wisdom store");
    store->add_option("--store", store_dir, "Wisdom store directory");
    store->require_subcommand(1);
    // Lets --store follow the action ("store list --store DIR").
    store->fallthrough();
    auto* list = store->add_subcommand("list", "List entries")->fallthrough();
    std::optional<std::string> show_id;
    std::optional<std::string> query;
    std::optional<fs::path> show_config;
    auto* show = store->add_subcommand("show", "Show entries in full")->fallthrough();
    show->add_option("task_id", show_id, "Only this task");
    show->add_option("--query", query, "Rank by cosine similarity to this text");
    show->add_option("--config", show_config, "Config selecting the embedder")->check(CLI::ExistingFile);
    std::string delete_id;
    bool confirmed = false;
    auto* del = store->add_subcommand("delete", "Delete one entry")->fallthrough();
    del->add_option("task_id", delete_id, "Task to delete")->required();
    del->add_flag("--yes", confirmed, "Confirm deletion");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? exit_code::kOk : exit_code::kUsage;
    }

    if (store_path) overrides.store = *store_path;
    overrides.seed = seed;
    overrides.budget_sec = budget_sec;
    overrides.step_limit = step_limit;
    overrides.delta = delta;
    overrides.workers = workers;
    if (run_dir_flag) overrides.run_dir = *run_dir_flag;

    if (*run) return cmd_run(task_dir, config_path, overrides, out, err, cancel);
    if (*warm) return cmd_warm(corpus_dir, config_path, overrides, out, err, cancel);
    if (*trace) return cmd_trace(trace_dir, out, err);
    if (*replay) return cmd_replay(replay_dir, out, err);
    if (*list) return cmd_store_list(store_dir, out, err);
    if (*show) return cmd_store_show(store_dir, show_id, query, show_config, out, err);
    if (*del) return cmd_store_delete(store_dir, delete_id, confirmed, out, err);
    return exit_code::kUsage;
}

}  // namespace hcc
