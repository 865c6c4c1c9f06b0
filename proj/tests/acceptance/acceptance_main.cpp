// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hcc/cache_hierarchy.hpp"
#include "hcc/cli.hpp"
#include "hcc/error.hpp"
#include "hcc/event_log.hpp"
#include "hcc/llm_gateway.hpp"
#include "hcc/migration.hpp"
#include "hcc/prompts.hpp"
#include "hcc/sandbox.hpp"
#include "hcc/structured_output.hpp"
#include "hcc/trace.hpp"
#include "hcc/wisdom_store.hpp"
#include "test_support.hpp"

using namespace hcc;
using hcc::testing::TempDir;
namespace fs = std::filesystem;

namespace {

using Failures = std::vector<std::string>;

// Keeps at most a handful of messages so one systematic bug does not flood the log.
void record(Failures& failures, std::string message) {
    if (failures.size() < 8) failures.push_back(std::move(message));
}

struct CliOutcome {
    int code = -1;
    std::string out;
    std::string err;
};

CliOutcome cli(std::vector<std::string> args) {
    args.insert(args.begin(), "hcc");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    CliOutcome o;
    o.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    o.out = out.str();
    o.err = err.str();
    return o;
}

bool contains(const std::string& haystack, const std::string& needle) {
    return haystack.find(needle) != std::string::npos;
}

ScriptRule reply(PromptName prompt, std::string text, bool repeat) {
    ScriptRule rule;
    rule.prompt = prompt;
    rule.response = std::move(text);
    rule.repeat = repeat;
    return rule;
}

// ---- 1: context assembly equals the brute-force oracle ----------------------

Failures context_exactness(std::ostream& detail) {
    Failures failures;
    std::size_t checked = 0;
    for (std::uint64_t seed = 1; seed <= 200; ++seed) {
        std::mt19937_64 pick(seed * 7919);
        hcc::testing::SyntheticShape shape;
        shape.phases = std::uniform_int_distribution<int>(2, 6)(pick);
        shape.min_trajectories = 1;
        shape.max_trajectories = 4;
        hcc::testing::SyntheticRun run(seed, shape);
        run.run([&](const hcc::testing::SyntheticRun& r) {
            const EventIndex t = r.log.size();
            const std::string diff = hcc::testing::compare(build_context(r.log, r.ledger, r.l2, t),
                                                           hcc::testing::oracle_context(r.log, r.ledger, r.l2, t));
            ++checked;
            if (!diff.empty()) record(failures, "seed " + std::to_string(seed) + " t=" + std::to_string(t) + ": " + diff);
        });
    }
    detail << checked << " steps checked";
    if (checked < 200 * 20) record(failures, "only " + std::to_string(checked) + " steps checked");
    return failures;
}

// ---- 2: promotion lifecycle -------------------------------------------------

// Checks the state right after the first `phase_count` phases were promoted.
void check_promoted(const hcc::testing::SyntheticRun& r, std::size_t phase_count, const std::string& where,
                    Failures& failures) {
    const EventIndex t = r.log.size();
    const L1View l1 = l1_view(r.log, r.ledger, t);
    const EventIndex t0 = *r.ledger.t0();

    std::set<EventIndex> expected_evicted;
    for (std::size_t p = 0; p < phase_count; ++p) {
        const PhasePlan& plan = r.plans[p];
        const KnowledgeUnit* unit = r.l2.find_phase(plan.phase);
        if (!unit) {
            record(failures, where + ": no unit for phase " + std::to_string(plan.phase));
            continue;
        }
        const EventIndex boundary = r.ledger.boundaries()[p + 1];
        if (unit->range_start != plan.plan_event_index + 1 || unit->range_end != boundary - 1)
            record(failures, where + ": unit range of phase " + std::to_string(plan.phase) + " is (" +
                                 std::to_string(unit->range_start) + ", " + std::to_string(unit->range_end) + ")");
        for (const Trajectory& trajectory : r.phase_trajectories[p])
            for (EventIndex k = trajectory.start; k <= trajectory.end; ++k) {
                expected_evicted.insert(k);
                if (l1.contains(k)) record(failures, where + ": trajectory event " + std::to_string(k) + " still in L1");
            }
        if (!l1.contains(plan.plan_event_index) ||
            hit(plan.plan_event_index, t, l1, r.l2, r.log).kind != Hit::Kind::Raw)
            record(failures, where + ": plan event " + std::to_string(plan.plan_event_index) + " not raw");
    }
    for (EventIndex k = 0; k < t0; ++k)
        if (!l1.contains(k) || hit(k, t, l1, r.l2, r.log).kind != Hit::Kind::Raw)
            record(failures, where + ": bootstrap event " + std::to_string(k) + " not raw");
    if (r.log.evicted() != expected_evicted)
        record(failures, where + ": evicted set differs from the union of trajectory ranges");
    if (r.l2.size() != phase_count) record(failures, where + ": L2 holds " + std::to_string(r.l2.size()) + " units");
}

// Appends one more phase by hand (plan, three one-exchange trajectories, note).
PhasePlan append_phase(hcc::testing::SyntheticRun& r, std::vector<Trajectory>& trajectories) {
    PhasePlan plan;
    plan.phase = static_cast<int>(r.plans.size()) + 1;
    plan.plan_event_index = r.log.size();
    for (int i = 1; i <= 3; ++i) plan.plan.directions.push_back({"extra " + std::to_string(i), {"only"}});
    r.log.append(r.log.make(Origin::Agent, EventKind::PlanProposal, serialize_research_plan(plan.plan)));
    for (int i = 1; i <= 3; ++i) {
        Trajectory trajectory{plan.phase, i, 1, r.log.size(), r.log.size() + 1, TrajectoryOutcome::NoImprovement,
                              std::nullopt};
        r.log.append(r.log.make(Origin::Agent, EventKind::CodePatch, "patch", trajectory.thread()));
        r.log.append(r.log.make(Origin::Environment, EventKind::TerminalOutput, "output", trajectory.thread()));
        trajectories.push_back(trajectory);
    }
    r.log.append(r.log.make(Origin::Environment, EventKind::SummaryNote, "closing note"));
    return plan;
}

Failures promotion_lifecycle() {
    Failures failures;
    for (std::uint64_t seed = 1; seed <= 60; ++seed) {
        hcc::testing::SyntheticShape shape;
        shape.phases = 2 + static_cast<int>(seed % 5);
        hcc::testing::SyntheticRun run(seed + 1000, shape);
        std::size_t seen = 0;
        run.run([&](const hcc::testing::SyntheticRun& r) {
            if (r.promotions.size() == seen) return;
            seen = r.promotions.size();
            check_promoted(r, seen, "seed " + std::to_string(seed) + " phase " + std::to_string(seen), failures);
        });
        if (seen != static_cast<std::size_t>(shape.phases)) record(failures, "seed " + std::to_string(seed) + ": missing promotions");

        // A failing P1 call must leave eviction state and L2 untouched.
        std::vector<Trajectory> trajectories;
        const PhasePlan plan = append_phase(run, trajectories);
        const auto evicted_before = run.log.evicted();
        const std::size_t units_before = run.l2.size();
        const ContextView context_before = build_context(run.log, run.ledger, run.l2, run.log.size());
        ScriptedBackend failing;
        ScriptRule broken;
        broken.prompt = PromptName::PromoteP1;
        broken.inject = ScriptRule::Inject::Failure;
        broken.repeat = true;
        failing.add(broken);
        bool threw = false;
        try {
            promote_phase(plan, trajectories, "synthetic task", run.log, run.l2, failing);
        } catch (const Error& e) {
            threw = e.code() == Errc::BackendFailure;
        }
        if (!threw) record(failures, "seed " + std::to_string(seed) + ": injected failure not reported");
        if (run.log.evicted() != evicted_before || run.l2.size() != units_before ||
            build_context(run.log, run.ledger, run.l2, run.log.size()) != context_before)
            record(failures, "seed " + std::to_string(seed) + ": failed promotion changed state");

        // The same phase then promotes cleanly.
        promote_phase(plan, trajectories, "synthetic task", run.log, run.l2, run.gen);
        run.ledger.mark(run.log.size(), run.log);
        run.plans.push_back(plan);
        run.phase_trajectories.push_back(trajectories);
        check_promoted(run, run.plans.size(), "seed " + std::to_string(seed) + " retried phase", failures);
    }
    return failures;
}

// ---- 3: saturation workload -------------------------------------------------

struct SaturationShape {
    std::size_t phases = 4;
    std::size_t trajectories = 6;
    std::size_t task_tokens = 1000;
    std::size_t patch_tokens = 500;
    std::size_t output_tokens = 3000;
    std::size_t plan_tokens = 250;
    std::size_t note_tokens = 100;
    std::size_t summary_tokens = 500;
};

// Closed forms. Every trajectory is one patch/output exchange and the
// bootstrap is one such exchange after the task description. Both peaks sit
// at the last patch of the last phase, whose context holds the earlier
// events of that phase but not the patch itself.
std::size_t naive_peak_closed_form(const SaturationShape& s) {
    const std::size_t exchange = s.patch_tokens + s.output_tokens;
    const std::size_t bootstrap = s.task_tokens + exchange;
    const std::size_t finished_phases = (s.phases - 1) * (s.plan_tokens + s.trajectories * exchange + s.note_tokens);
    return bootstrap + finished_phases + s.plan_tokens + (s.trajectories - 1) * exchange;
}

std::size_t hcc_peak_closed_form(const SaturationShape& s) {
    const std::size_t exchange = s.patch_tokens + s.output_tokens;
    const std::size_t bootstrap = s.task_tokens + exchange;
    return bootstrap + s.phases * s.plan_tokens + (s.phases - 1) * s.summary_tokens + (s.trajectories - 1) * exchange;
}

Failures saturation(std::ostream& detail) {
    Failures failures;
    const SaturationShape s;
    EventLog log;
    PhaseLedger ledger;
    L2Store l2;
    ScriptedBackend gen;
    gen.add(reply(PromptName::PromoteP1, hcc::testing::payload_of_tokens(s.summary_tokens), true));
    std::vector<PromotionRecord> promotions;

    auto add = [&](Origin origin, EventKind kind, std::size_t tokens, ThreadTag thread) {
        log.append(log.make(origin, kind, hcc::testing::payload_of_tokens(tokens), thread));
        if (log.events().back().token_estimate != tokens) record(failures, "token estimate differs from the workload");
    };
    add(Origin::Environment, EventKind::TaskInit, s.task_tokens, ThreadTag::main());
    add(Origin::Agent, EventKind::CodePatch, s.patch_tokens, ThreadTag::main());
    add(Origin::Environment, EventKind::TerminalOutput, s.output_tokens, ThreadTag::main());
    ledger.mark(log.size(), log);
    for (std::size_t p = 1; p <= s.phases; ++p) {
        PhasePlan plan;
        plan.phase = static_cast<int>(p);
        plan.plan_event_index = log.size();
        for (std::size_t i = 1; i <= s.trajectories; ++i)
            plan.plan.directions.push_back({"direction " + std::to_string(i), {"suggestion"}});
        add(Origin::Agent, EventKind::PlanProposal, s.plan_tokens, ThreadTag::main());
        std::vector<Trajectory> trajectories;
        for (std::size_t i = 1; i <= s.trajectories; ++i) {
            Trajectory trajectory{plan.phase, static_cast<int>(i), 1, log.size(), log.size() + 1,
                                  TrajectoryOutcome::NoImprovement, std::nullopt};
            add(Origin::Agent, EventKind::CodePatch, s.patch_tokens, trajectory.thread());
            add(Origin::Environment, EventKind::TerminalOutput, s.output_tokens, trajectory.thread());
            trajectories.push_back(trajectory);
        }
        add(Origin::Environment, EventKind::SummaryNote, s.note_tokens, ThreadTag::main());
        promotions.push_back(promote_phase(plan, trajectories, "saturation task", log, l2, gen));
        ledger.mark(log.size(), log);
    }

    const auto rows = compute_trace(log, ledger.boundaries(), promotions);
    const TraceSummary summary = summarize(rows);
    const std::size_t naive_expected = naive_peak_closed_form(s);
    const std::size_t hcc_expected = hcc_peak_closed_form(s);
    detail << "hcc peak " << summary.hcc_peak << " (expected " << hcc_expected << "), naive peak "
           << summary.naive_peak << " (expected " << naive_expected << "), ratio " << std::fixed
           << std::setprecision(4) << summary.ratio;
    if (summary.naive_peak != naive_expected) record(failures, "naive peak mismatch");
    if (summary.hcc_peak != hcc_expected) record(failures, "hcc peak mismatch");
    if (2 * summary.hcc_peak > summary.naive_peak) record(failures, "hcc peak above half of naive");
    const std::size_t agent_events =
        1 + s.phases * (1 + s.trajectories);  // bootstrap patch, then plan + patches per phase
    if (rows.size() != agent_events) record(failures, "trace has " + std::to_string(rows.size()) + " rows");
    return failures;
}

// ---- 4: prefetch against brute force ----------------------------------------

double brute_cosine(const Vector& a, const Vector& b) {
    long double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += static_cast<long double>(a[i]) * b[i];
        na += static_cast<long double>(a[i]) * a[i];
        nb += static_cast<long double>(b[i]) * b[i];
    }
    return static_cast<double>(dot / (std::sqrt(na) * std::sqrt(nb)));
}

Failures prefetch_brute_force() {
    Failures failures;
    constexpr std::size_t kDim = 64;
    constexpr double kTol = 1e-9;
    std::mt19937_64 rng(20240501);
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto random_vector = [&] {
        Vector v(kDim);
        for (double& x : v) x = gauss(rng);
        return v;
    };

    for (int round = 0; round < 100; ++round) {
        const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 500)(rng);
        WisdomStore store(kDim);
        std::vector<std::pair<std::string, Vector>> raw;
        const Vector query = random_vector();
        for (std::size_t i = 0; i < n; ++i) {
            Vector v = random_vector();
            // some entries lean towards the query so the top of the ranking is populated
            if (i % 7 == 0) {
                const double w = std::uniform_real_distribution<double>(0.5, 4.0)(rng);
                for (std::size_t d = 0; d < kDim; ++d) v[d] = w * query[d] + v[d] * 0.5;
            }
            const std::string id = "task-" + std::to_string(i);
            store.insert(id, "descriptor " + id, v, "DATA SUMMARY: x\nMODEL SUMMARY: y");
            raw.emplace_back(id, v);
        }
        const std::size_t k = std::uniform_int_distribution<std::size_t>(1, n + 2)(rng);
        double delta = std::uniform_real_distribution<double>(-0.2, 0.8)(rng);

        // every fourth round places the threshold exactly on an entry's similarity
        std::string boundary_id;
        if (round % 4 == 0) {
            const auto all = store.prefetch(query, -2.0, n);
            const auto& pivot = all[all.size() / 3];
            delta = pivot.similarity;
            boundary_id = pivot.entry->task_id;
        }

        struct Expected {
            std::string id;
            double similarity;
        };
        std::vector<Expected> expected;
        std::map<std::string, double> oracle;
        for (const auto& [id, v] : raw) {
            const double s = brute_cosine(query, v);
            oracle[id] = s;
            if (s > delta + kTol) expected.push_back({id, s});
            else if (s > delta - kTol && id != boundary_id)
                record(failures, "round " + std::to_string(round) + ": random threshold landed on a similarity");
        }
        std::stable_sort(expected.begin(), expected.end(),
                         [](const Expected& a, const Expected& b) { return a.similarity > b.similarity; });
        if (expected.size() > k) expected.resize(k);

        const auto hits = store.prefetch(query, delta, k);
        const std::string where = "round " + std::to_string(round) + " (N=" + std::to_string(n) + ")";
        if (hits.size() != expected.size()) {
            record(failures, where + ": " + std::to_string(hits.size()) + " hits, expected " +
                                 std::to_string(expected.size()));
            continue;
        }
        for (std::size_t i = 0; i < hits.size(); ++i) {
            const std::string& id = hits[i].entry->task_id;
            if (std::abs(hits[i].similarity - oracle[id]) > kTol) record(failures, where + ": similarity of " + id);
            if (std::abs(hits[i].similarity - expected[i].similarity) > kTol) record(failures, where + ": ranking at " + std::to_string(i));
            if (!(hits[i].similarity > delta)) record(failures, where + ": hit at or below the threshold");
            if (id == boundary_id) record(failures, where + ": entry exactly at the threshold was returned");
        }
        if (store.version() != n) record(failures, where + ": prefetch mutated the store");
    }
    return failures;
}

// ---- 5: toy task end to end -------------------------------------------------

std::string toy(const std::string& name) { return (hcc::testing::fixtures_dir() / "toy" / name).string(); }

Failures toy_end_to_end() {
    Failures failures;
    TempDir dir;
    std::vector<CliOutcome> runs;
    for (const char* name : {"a", "b"}) {
        runs.push_back(cli({"run", toy("churn"), "--config", toy("config.toml"), "--store",
                            (dir / (std::string("store-") + name)).string(), "--run-dir",
                            (dir / (std::string("run-") + name)).string(), "--record"}));
        if (runs.back().code != exit_code::kOk)
            record(failures, std::string("run ") + name + " exited " + std::to_string(runs.back().code) + ": " +
                                 runs.back().err);
    }
    if (!failures.empty()) return failures;

    const std::string& out = runs[0].out;
    if (!contains(out, "best validation metric: ") || contains(out, "best validation metric: none"))
        record(failures, "no solution reported");

    // the best solution's source must be a successful execution that wrote a submission
    const EventLog log = read_events_jsonl(dir / "run-a" / "events.jsonl");
    std::optional<double> best;
    bool submission = false;
    for (const Event& e : log.events())
        if (e.kind == EventKind::TerminalOutput && e.metric && (!best || *e.metric > *best)) {
            best = e.metric;
            submission = e.submission_produced;
        }
    std::ostringstream best_text;
    best_text << "best validation metric: " << (best ? *best : 0.0) << " (event";
    if (!best || !submission) record(failures, "best execution produced no submission");
    if (!contains(out, best_text.str())) record(failures, "reported best differs from the log maximum");

    for (const char* file : {"events.jsonl", "trace.csv"}) {
        const std::string a = hcc::testing::read_text(dir / "run-a" / file);
        const std::string b = hcc::testing::read_text(dir / "run-b" / file);
        if (a.empty() || a != b) record(failures, std::string(file) + " differs between identical runs");
    }

    CliOutcome replay = cli({"replay", (dir / "run-a").string()});
    if (replay.code != exit_code::kOk) record(failures, "replay exited " + std::to_string(replay.code) + ": " + replay.err);
    return failures;
}

// ---- 6: prompt templates and plan parsing -----------------------------------

const char* golden_file(PromptName name) {
    switch (name) {
        case PromptName::Descriptor: return "descriptor.txt";
        case PromptName::Draft: return "draft.txt";
        case PromptName::Debug: return "debug.txt";
        case PromptName::Plan: return "plan.txt";
        case PromptName::Improve: return "improve.txt";
        case PromptName::PromoteP1: return "promote_p1.txt";
        case PromptName::PromoteP2: return "promote_p2.txt";
    }
    return "";
}

Failures templates_and_plans() {
    Failures failures;
    std::size_t compared = 0;
    for (PromptName name : kAllPrompts) {
        const std::string golden = hcc::testing::read_text(hcc::testing::golden_dir() / "prompts" / golden_file(name));
        if (std::string(prompt_template(name)) != golden)
            record(failures, std::string(to_string(name)) + " template differs from its golden file");
        ++compared;
    }
    if (compared != 7) record(failures, "expected 7 templates");

    const std::string plan_text = std::string(prompt_template(PromptName::Plan));
    const auto at = plan_text.find("Below is an example:");
    if (at == std::string::npos) {
        record(failures, "plan template has no example");
    } else {
        const ResearchPlan plan = parse_research_plan(plan_text.substr(at));
        if (plan.direction_count() != 3 || plan.suggestion_counts() != std::vector<std::size_t>{2, 2, 2})
            record(failures, "plan example does not parse as 3 directions x 2 suggestions");
    }
    for (const char* few : {R"({"a": {"1": "x"}, "b": {"1": "y"}})", R"({"only": {"1": "x", "2": "y"}})"}) {
        try {
            parse_research_plan(few);
            record(failures, std::string("accepted a plan with fewer than 3 directions: ") + few);
        } catch (const Error& e) {
            if (e.code() != Errc::TooFewDirections) record(failures, std::string("wrong error for ") + few);
        }
    }
    return failures;
}

// ---- 7: sandbox contracts ---------------------------------------------------

std::uint64_t tree_hash(const fs::path& dir) {
    // FNV-1a over sorted (path, bytes) pairs
    std::map<std::string, std::string> files;
    for (const auto& entry : fs::recursive_directory_iterator(dir))
        if (entry.is_regular_file()) files[fs::relative(entry.path(), dir).string()] = hcc::testing::read_text(entry.path());
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&](const std::string& s) {
        for (unsigned char c : s) h = (h ^ c) * 1099511628211ull;
        h = (h ^ 0xff) * 1099511628211ull;
    };
    for (const auto& [name, bytes] : files) {
        mix(name);
        mix(bytes);
    }
    return h;
}

Failures sandbox_contracts() {
    Failures failures;
    const fs::path fixtures = hcc::testing::fixtures_dir() / "sandbox";
    TempDir dir;
    auto run = [&](const std::string& script, double timeout) {
        Workspace ws = prepare_workspace(fixtures / "data", dir / "ws");
        ExecutionOptions options;
        options.timeout_sec = timeout;
        return execute(ws, hcc::testing::read_text(fixtures / script), options);
    };

    const ExecutionReport metric = run("metric.py", 20.0);
    if (metric.exit_status != ExitStatus::Success || metric.parsed_metric != std::optional<double>(0.8125))
        record(failures, "metric.py: expected Success with metric 0.8125");

    const ExecutionReport slow = run("sleeper.py", 1.0);
    if (slow.exit_status != ExitStatus::Timeout) record(failures, "sleeper.py did not time out");
    if (slow.duration_sec > 3.0) record(failures, "timeout took " + std::to_string(slow.duration_sec) + "s");

    const std::uint64_t original = tree_hash(fixtures / "data");
    const ExecutionReport tampered = run("tamper.py", 20.0);
    if (!tampered.input_restored) record(failures, "tampering not reported");
    if (tree_hash(dir / "ws" / "input") != original) record(failures, "input/ differs from the original after tampering");

    const ExecutionReport submitted = run("submit.py", 20.0);
    if (!submitted.submission_produced ||
        hcc::testing::read_text(dir / "ws" / "submission" / "submission.csv") != "id,y\n4,0\n5,1\n")
        record(failures, "submission.csv not detected");
    const ExecutionReport quiet = run("metric.py", 20.0);
    if (quiet.submission_produced) record(failures, "submission reported for a script that wrote none");

    const ExecutionReport failed = run("fail.py", 20.0);
    if (failed.exit_status != ExitStatus::NonzeroExit || failed.exit_code != 1)
        record(failures, "fail.py: expected NonzeroExit with code 1");
    return failures;
}

// ---- 8: prior wisdom from a warmed corpus -----------------------------------

std::string corpus(const std::string& name) { return (hcc::testing::fixtures_dir() / "corpus" / name).string(); }

Failures warm_and_prefetch() {
    Failures failures;
    TempDir dir;
    const std::string store = (dir / "store").string();
    CliOutcome warm = cli({"warm", corpus("tasks"), "--config", corpus("corpus.toml"), "--store", store, "--run-dir",
                           (dir / "runs").string()});
    if (warm.code != exit_code::kOk) record(failures, "warm exited " + std::to_string(warm.code) + ": " + warm.err);
    const WisdomStore stored = load_wisdom_store(store);
    if (stored.size() != 3) record(failures, "store holds " + std::to_string(stored.size()) + " entries");

    CliOutcome query = cli({"run", corpus("query/telco-retention"), "--config", corpus("corpus.toml"), "--store", store,
                            "--run-dir", (dir / "query").string()});
    if (query.code != exit_code::kOk) record(failures, "query run exited " + std::to_string(query.code) + ": " + query.err);
    if (!contains(query.out, "prior wisdom from: churn-telco\n")) record(failures, "prefetched set is not [churn-telco]");

    const EventLog log = read_events_jsonl(dir / "query" / "events.jsonl");
    if (log.empty()) return failures;
    const std::string& e0 = log.at(0).payload;
    if (!contains(e0, "## From churn-telco")) record(failures, "e_0 lacks the churn-telco wisdom");
    for (const char* other : {"## From house-prices", "## From review-sentiment"})
        if (contains(e0, other)) record(failures, std::string("e_0 contains ") + other);
    return failures;
}

struct Criterion {
    int id;
    const char* name;
    double limit_sec;  // 0 = no time bound
    std::function<Failures(std::ostream&)> check;
};

}  // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {1, "context assembly matches the oracle on 200 random runs", 30.0,
         [](std::ostream& detail) { return context_exactness(detail); }},
        {2, "promotion lifecycle: eviction, units, raw plans, atomic failure", 10.0,
         [](std::ostream&) { return promotion_lifecycle(); }},
        {3, "saturation workload: closed-form peaks, hcc <= 50% of naive", 0.0,
         [](std::ostream& detail) { return saturation(detail); }},
        {4, "prefetch equals brute force on 100 random stores", 0.0,
         [](std::ostream&) { return prefetch_brute_force(); }},
        {5, "toy task end to end: solution, deterministic artifacts, replay", 60.0,
         [](std::ostream&) { return toy_end_to_end(); }},
        {6, "prompt templates and plan parsing", 0.0, [](std::ostream&) { return templates_and_plans(); }},
        {7, "sandbox: metric, timeout, input restore, submission", 0.0,
         [](std::ostream&) { return sandbox_contracts(); }},
        {8, "warmed corpus prefetches exactly churn-telco into e_0", 0.0,
         [](std::ostream&) { return warm_and_prefetch(); }},
    };

    int failed = 0;
    for (const auto& criterion : criteria) {
        std::ostringstream detail;
        Failures failures;
        const auto start = std::chrono::steady_clock::now();
        try {
            failures = criterion.check(detail);
        } catch (const std::exception& e) {
            failures.push_back(std::string("exception: ") + e.what());
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (criterion.limit_sec > 0 && seconds > criterion.limit_sec)
            failures.push_back("took " + std::to_string(seconds) + "s, limit " + std::to_string(criterion.limit_sec) + "s");

        std::cout << (failures.empty() ? "PASS" : "FAIL") << "  " << criterion.id << "  " << criterion.name << "  ("
                  << std::fixed << std::setprecision(2) << seconds << "s)";
        if (!detail.str().empty()) std::cout << "  " << detail.str();
        std::cout << '\n';
        for (const auto& f : failures) std::cout << "        " << f << '\n';
        if (!failures.empty()) ++failed;
    }
    std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed\n";
    return failed == 0 ? 0 : 1;
}
