#include <doctest.h>

#include <set>

#include "hcc/error.hpp"
#include "hcc/migration.hpp"
#include "test_support.hpp"

using namespace hcc;
using hcc::testing::TempDir;

namespace {

Errc code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an hcc::Error");
    return Errc::PreconditionFailed;
}

ScriptRule reply(PromptName prompt, std::string text, bool repeat = false) {
    ScriptRule rule;
    rule.prompt = prompt;
    rule.response = std::move(text);
    rule.repeat = repeat;
    return rule;
}

ScriptRule broken(PromptName prompt) {
    ScriptRule rule;
    rule.prompt = prompt;
    rule.inject = ScriptRule::Inject::Failure;
    return rule;
}

// Bootstrap (0..2), plan at 3, a 3x2 plan with two events per trajectory
// (4..15), closing note at 16.
struct OnePhase {
    EventLog log;
    PhaseLedger ledger;
    L2Store l2;
    PhasePlan plan;
    std::vector<Trajectory> trajectories;

    OnePhase() {
        log.append(log.make(Origin::Environment, EventKind::TaskInit, "task"));
        log.append(log.make(Origin::Agent, EventKind::CodePatch, "draft"));
        log.append(log.make(Origin::Environment, EventKind::TerminalOutput, "ok"));
        ledger.mark(3, log);
        plan.phase = 1;
        plan.plan_event_index = 3;
        for (int i = 1; i <= 3; ++i) plan.plan.directions.push_back({"dir " + std::to_string(i), {"s1", "s2"}});
        log.append(log.make(Origin::Agent, EventKind::PlanProposal, serialize_research_plan(plan.plan)));
        for (int i = 1; i <= 3; ++i) {
            for (int j = 1; j <= 2; ++j) {
                Trajectory t{1, i, j, log.size(), log.size() + 1, TrajectoryOutcome::NoImprovement, std::nullopt};
                log.append(log.make(Origin::Agent, EventKind::CodePatch, "code", t.thread()));
                log.append(log.make(Origin::Environment, EventKind::TerminalOutput, "out", t.thread()));
                trajectories.push_back(t);
            }
        }
        log.append(log.make(Origin::Environment, EventKind::SummaryNote, "phase 1 closed"));
    }
};

}  // namespace

TEST_CASE("descriptor contract") {
    CHECK_FALSE(descriptor_violation("A binary classification task\nwrapped softly over lines.", 250));
    CHECK(descriptor_violation("", 250));
    CHECK(descriptor_violation("one\n\ntwo", 250));
    CHECK(descriptor_violation("- item", 250));
    CHECK(descriptor_violation("1. item", 250));
    CHECK(descriptor_violation("# Heading", 250));
    CHECK(descriptor_violation("use `pandas`", 250));
    CHECK(descriptor_violation(std::string(1001, 'a'), 250));
    CHECK_FALSE(descriptor_violation("3.5 million rows of sales", 250));
}

TEST_CASE("descriptor generation retries once on a format violation") {
    ScriptedBackend gen;
    gen.add(reply(PromptName::Descriptor, "- a list\n- not a paragraph"));
    gen.add(reply(PromptName::Descriptor, "Tabular churn prediction\nwith AUC scoring."));
    CHECK(generate_descriptor("task text", gen) == "Tabular churn prediction with AUC scoring.");

    ScriptedBackend bad;
    bad.add(reply(PromptName::Descriptor, "one\n\ntwo", true));
    CHECK(code_of([&] { generate_descriptor("task text", bad); }) == Errc::FormatViolation);
    CHECK(bad.calls() == 2);
    CHECK(code_of([&] { generate_descriptor("  ", bad); }) == Errc::PreconditionFailed);
}

TEST_CASE("promote_phase evicts exactly the trajectory indices and adds one unit") {
    OnePhase run;
    ScriptedBackend gen;
    gen.add(reply(PromptName::PromoteP1, "  direction 2 helped most  "));
    PromotionRecord record = promote_phase(run.plan, run.trajectories, "task", run.log, run.l2, gen);

    std::set<EventIndex> expected;  // union of the trajectory ranges
    for (const auto& t : run.trajectories)
        for (EventIndex k = t.start; k <= t.end; ++k) expected.insert(k);
    CHECK(std::set<EventIndex>(record.evicted.begin(), record.evicted.end()) == expected);
    CHECK(run.log.evicted() == expected);
    CHECK_FALSE(run.log.is_evicted(3));
    CHECK_FALSE(run.log.is_evicted(16));
    REQUIRE(run.l2.size() == 1);
    const KnowledgeUnit& unit = run.l2.units().front();
    CHECK(unit.phase == 1);
    CHECK(unit.range_start == 4);
    CHECK(unit.range_end == 16);
    CHECK(unit.text == "direction 2 helped most");
    CHECK(promotion_record_from_json(to_json(record)).evicted == record.evicted);

    CHECK(code_of([&] { promote_phase(run.plan, run.trajectories, "task", run.log, run.l2, gen); }) ==
          Errc::AlreadyPromoted);
}

TEST_CASE("P1 prompt carries the plan, the trajectories and prior memory") {
    OnePhase run;
    ScriptedBackend gen;
    ScriptRule echo;
    echo.prompt = PromptName::PromoteP1;
    echo.echo = true;
    gen.add(echo);
    PromotionRecord record = promote_phase(run.plan, run.trajectories, "the task", run.log, run.l2, gen);
    const std::string& prompt = record.unit.text;
    CHECK(prompt.find("the task") != std::string::npos);
    CHECK(prompt.find("\"dir 2\"") != std::string::npos);
    CHECK(prompt.find("## Direction 3: dir 3\n### Suggestion 2: s2\nOutcome: NoImprovement") != std::string::npos);
    CHECK(prompt.find("(no previous research plans)") != std::string::npos);
    CHECK(render_memory(run.log, run.l2).rfind("## Research plan 1\n\n{", 0) == 0);
}

TEST_CASE("promote_phase is atomic under backend failure and empty summaries") {
    OnePhase run;
    ScriptedBackend failing;
    failing.add(broken(PromptName::PromoteP1));
    CHECK(code_of([&] { promote_phase(run.plan, run.trajectories, "task", run.log, run.l2, failing); }) ==
          Errc::BackendFailure);
    CHECK(run.log.evicted().empty());
    CHECK(run.l2.empty());

    ScriptedBackend empty;
    empty.add(reply(PromptName::PromoteP1, "   ", true));
    CHECK(code_of([&] { promote_phase(run.plan, run.trajectories, "task", run.log, run.l2, empty); }) ==
          Errc::FormatViolation);
    CHECK(run.log.evicted().empty());
    CHECK(run.l2.empty());

    // a later successful attempt still works on the untouched state
    ScriptedBackend good;
    good.add(reply(PromptName::PromoteP1, "ok"));
    CHECK(promote_phase(run.plan, run.trajectories, "task", run.log, run.l2, good).evicted.size() == 12);
}

TEST_CASE("promote_phase preconditions") {
    OnePhase run;
    ScriptedBackend gen;
    gen.add(reply(PromptName::PromoteP1, "ok", true));
    PhasePlan wrong = run.plan;
    wrong.plan_event_index = 2;
    CHECK(code_of([&] { promote_phase(wrong, run.trajectories, "t", run.log, run.l2, gen); }) ==
          Errc::PreconditionFailed);
    CHECK(code_of([&] { promote_phase(run.plan, {}, "t", run.log, run.l2, gen); }) == Errc::PreconditionFailed);
    auto mislabeled = run.trajectories;
    mislabeled[0].direction = 2;
    CHECK(code_of([&] { promote_phase(run.plan, mislabeled, "t", run.log, run.l2, gen); }) ==
          Errc::PreconditionFailed);
}

TEST_CASE("promote_task stores wisdom keyed by the descriptor embedding") {
    OnePhase run;
    ScriptedBackend gen;
    gen.add(reply(PromptName::PromoteP1, "phase summary"));
    ScriptRule echo;
    echo.prompt = PromptName::PromoteP2;
    echo.echo = true;
    echo.contains = "ECHO";
    gen.add(echo);
    gen.add(reply(PromptName::PromoteP2, "DATA SUMMARY: csv\nMODEL SUMMARY: boosting", true));
    promote_phase(run.plan, run.trajectories, "task", run.log, run.l2, gen);
    run.ledger.mark(run.log.size(), run.log);

    HashingEmbedder embedder(16);
    WisdomRepository repo(WisdomStore(16), std::nullopt);
    const std::size_t before = run.log.size();
    Solution solution{"print(1)", 0.8, MetricDirection::HigherIsBetter, true, 1};
    TaskPromotion result = promote_task("churn descriptor", "churn", "task", run.log, run.ledger, run.l2, solution,
                                        gen, embedder, repo);
    REQUIRE(result.entry.has_value());
    CHECK(result.entry->wisdom == "DATA SUMMARY: csv\nMODEL SUMMARY: boosting");
    CHECK(result.entry->embedding == embed(embedder, "churn descriptor"));
    CHECK(repo.snapshot().size() == 1);
    CHECK(run.log.size() == before);
    CHECK(run.l2.size() == 1);
}

TEST_CASE("promote_task skips insertion when wisdom lacks its sections") {
    EventLog log;
    PhaseLedger ledger;
    L2Store l2;
    ScriptedBackend gen;
    gen.add(reply(PromptName::PromoteP2, "just prose", true));
    HashingEmbedder embedder(16);
    WisdomRepository repo(WisdomStore(16), std::nullopt);
    TaskPromotion result =
        promote_task("descriptor", "id", "task", log, ledger, l2, std::nullopt, gen, embedder, repo);
    CHECK_FALSE(result.entry.has_value());
    REQUIRE(result.warning.has_value());
    CHECK(repo.snapshot().empty());
    CHECK(has_wisdom_sections("DATA SUMMARY: a MODEL SUMMARY: b"));
    CHECK_FALSE(has_wisdom_sections("MODEL SUMMARY: b DATA SUMMARY: a"));
}

TEST_CASE("promote_task reports duplicates under the reject policy") {
    EventLog log;
    PhaseLedger ledger;
    L2Store l2;
    ScriptedBackend gen;
    gen.add(reply(PromptName::PromoteP2, "DATA SUMMARY: a\nMODEL SUMMARY: b", true));
    HashingEmbedder embedder(16);
    WisdomRepository repo(WisdomStore(16), std::nullopt);
    CHECK(promote_task("d", "id", "t", log, ledger, l2, std::nullopt, gen, embedder, repo, {}, OverwritePolicy::Reject)
              .entry);
    TaskPromotion again =
        promote_task("d", "id", "t", log, ledger, l2, std::nullopt, gen, embedder, repo, {}, OverwritePolicy::Reject);
    CHECK_FALSE(again.entry);
    CHECK(again.warning);
}
