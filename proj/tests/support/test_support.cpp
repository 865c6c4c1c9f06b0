#include "test_support.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace hcc::testing {

namespace fs = std::filesystem;

TempDir::TempDir() {
    std::string pattern = (fs::temp_directory_path() / "hcc-test-XXXXXX").string();
    if (!mkdtemp(pattern.data())) throw std::runtime_error("mkdtemp failed");
    path_ = pattern;
}

TempDir::~TempDir() {
    std::error_code ec;
    // input/ copies are read-only; make them writable so removal succeeds.
    for (auto it = fs::recursive_directory_iterator(path_, ec); !ec && it != fs::recursive_directory_iterator(); ++it)
        fs::permissions(it->path(), fs::perms::owner_all, fs::perm_options::add, ec);
    fs::remove_all(path_, ec);
}

fs::path fixtures_dir() { return HCC_TEST_FIXTURES; }
fs::path golden_dir() { return HCC_TEST_GOLDEN; }

void write_text(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
    if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

std::string payload_of_tokens(std::size_t tokens, char fill) { return std::string(tokens * 4, fill); }

// ---- oracle -------------------------------------------------------------------

OracleContext oracle_context(const std::vector<Event>& events, const std::vector<EventIndex>& boundaries,
                             const std::set<EventIndex>& evicted, const std::vector<KnowledgeUnit>& units,
                             EventIndex t) {
    std::vector<EventIndex> known;  // boundaries recorded by time t
    for (EventIndex b : boundaries)
        if (b <= t) known.push_back(b);

    auto is_plan = [&](EventIndex k) {
        for (EventIndex b : known)
            if (b == k) return true;
        return false;
    };
    // Active window: everything after the latest boundary. A boundary equal
    // to t opens a phase whose plan has not been written yet.
    const bool has_latest = !known.empty();
    const EventIndex latest = has_latest ? known.back() : 0;

    OracleContext out;
    for (EventIndex k = 0; k < t; ++k) {
        bool raw;
        if (known.empty()) {
            raw = true;  // before t_0 the whole prefix is the view
        } else {
            const bool bootstrap = k < known.front();
            const bool plan = is_plan(k);
            const bool active = has_latest && k > latest && !evicted.contains(k);
            raw = bootstrap || plan || active;
        }
        if (raw) {
            const Event& e = events.at(k);
            out.segments.push_back({false, k, "[" + std::string(to_string(e.origin)) + "] " + e.payload, e.token_estimate});
            continue;
        }
        for (const auto& unit : units) {
            if (k > 0 && is_plan(k - 1) && unit.range_start == k) {
                out.segments.push_back({true, static_cast<std::size_t>(unit.phase),
                                        "[PHASE " + std::to_string(unit.phase) + " SUMMARY] " + unit.text,
                                        unit.token_estimate});
                break;
            }
        }
    }
    for (const auto& segment : out.segments) out.total_tokens += segment.tokens;
    return out;
}

OracleContext oracle_context(const EventLog& log, const PhaseLedger& ledger, const L2Store& l2, EventIndex t) {
    std::vector<Event> events(log.events().begin(), log.events().end());
    std::vector<EventIndex> boundaries(ledger.boundaries().begin(), ledger.boundaries().end());
    std::set<EventIndex> evicted = log.evicted();
    std::vector<KnowledgeUnit> units(l2.units().begin(), l2.units().end());
    return oracle_context(events, boundaries, evicted, units, t);
}

std::string compare(const ContextView& actual, const OracleContext& expected) {
    std::ostringstream diff;
    if (actual.segments.size() != expected.segments.size())
        diff << "segment count " << actual.segments.size() << " vs " << expected.segments.size() << "; ";
    const std::size_t n = std::min(actual.segments.size(), expected.segments.size());
    for (std::size_t i = 0; i < n; ++i) {
        const auto& a = actual.segments[i];
        const auto& e = expected.segments[i];
        const bool summary = a.source == SegmentSource::Summary;
        if (summary != e.summary || a.ref != e.ref || a.text != e.text || a.tokens != e.tokens) {
            diff << "segment " << i << " differs (" << (summary ? "summary " : "raw ") << a.ref << " vs "
                 << (e.summary ? "summary " : "raw ") << e.ref << "); ";
            break;
        }
    }
    if (actual.total_tokens != expected.total_tokens)
        diff << "total " << actual.total_tokens << " vs " << expected.total_tokens;
    return diff.str();
}

// ---- synthetic runs ------------------------------------------------------------

SyntheticRun::SyntheticRun(std::uint64_t seed, SyntheticShape shape) : rng_(seed), shape_(shape) {
    ScriptRule summary;
    summary.prompt = PromptName::PromoteP1;
    summary.repeat = true;
    summary.response = "Phase digest: boosting beat linear baselines; keep the encoded features.";
    gen.add(summary);
}

void SyntheticRun::append(Origin origin, EventKind kind, std::size_t tokens, ThreadTag thread) {
    log.append(log.make(origin, kind, payload_of_tokens(tokens, origin == Origin::Agent ? 'a' : 'e'), thread));
    if (hook_) hook_(*this);
}

void SyntheticRun::run(const std::function<void(const SyntheticRun&)>& on_step) {
    hook_ = on_step;
    std::uniform_int_distribution<std::size_t> size(1, shape_.max_payload_tokens);
    append(Origin::Environment, EventKind::TaskInit, size(rng_), ThreadTag::main());
    for (int round = 0; round <= shape_.bootstrap_debug_rounds; ++round) {
        append(Origin::Agent, EventKind::CodePatch, size(rng_), ThreadTag::main());
        append(Origin::Environment, EventKind::TerminalOutput, size(rng_), ThreadTag::main());
    }
    ledger.mark(log.size(), log);

    std::uniform_int_distribution<int> trajectory_count(shape_.min_trajectories, shape_.max_trajectories);
    std::uniform_int_distribution<int> exchanges(1, shape_.max_exchanges);
    for (int phase = 1; phase <= shape_.phases; ++phase) {
        PhasePlan plan;
        plan.phase = phase;
        plan.plan_event_index = log.size();
        const int n = trajectory_count(rng_);
        for (int i = 1; i <= n; ++i)
            plan.plan.directions.push_back({"direction " + std::to_string(i), {"suggestion"}});
        append(Origin::Agent, EventKind::PlanProposal, size(rng_), ThreadTag::main());

        std::vector<Trajectory> trajectories;
        for (int i = 1; i <= n; ++i) {
            Trajectory trajectory;
            trajectory.phase = phase;
            trajectory.direction = i;
            trajectory.suggestion = 1;
            trajectory.start = log.size();
            const int rounds = exchanges(rng_);
            for (int r = 0; r < rounds; ++r) {
                append(Origin::Agent, EventKind::CodePatch, size(rng_), trajectory.thread());
                append(Origin::Environment, EventKind::TerminalOutput, size(rng_), trajectory.thread());
            }
            trajectory.end = log.size() - 1;
            trajectory.outcome = TrajectoryOutcome::NoImprovement;
            trajectories.push_back(trajectory);
        }
        append(Origin::Environment, EventKind::SummaryNote, size(rng_), ThreadTag::main());

        PromotionRecord record = promote_phase(plan, trajectories, "synthetic task", log, l2, gen);
        ledger.mark(log.size(), log);
        promotions.push_back(record);
        plans.push_back(plan);
        phase_trajectories.push_back(trajectories);
        if (hook_) hook_(*this);
    }
    hook_ = {};
}

}  // namespace hcc::testing
