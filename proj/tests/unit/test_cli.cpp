#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <sstream>

#include "hcc/cli.hpp"
#include "hcc/wisdom_store.hpp"
#include "test_support.hpp"

using namespace hcc;
using hcc::testing::TempDir;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code = -1;
    std::string out;
    std::string err;
};

Outcome cli(std::vector<std::string> args) {
    args.insert(args.begin(), "hcc");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    Outcome o;
    o.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    o.out = out.str();
    o.err = err.str();
    return o;
}

std::string toy(const std::string& name) { return (hcc::testing::fixtures_dir() / "toy" / name).string(); }
std::string corpus(const std::string& name) { return (hcc::testing::fixtures_dir() / "corpus" / name).string(); }

void replace_once(const fs::path& path, const std::string& from, const std::string& to) {
    std::string text = hcc::testing::read_text(path);
    const auto at = text.find(from);
    REQUIRE(at != std::string::npos);
    text.replace(at, from.size(), to);
    hcc::testing::write_text(path, text);
}

}  // namespace

TEST_CASE("run on the toy task exits 0 and writes the run directory") {
    TempDir dir;
    Outcome o = cli({"run", toy("churn"), "--config", toy("config.toml"), "--store", (dir / "store").string(),
                     "--run-dir", (dir / "run").string()});
    CHECK(o.code == exit_code::kOk);
    CHECK(o.out.find("stop reason: StepLimit") != std::string::npos);
    CHECK(o.out.find("phases completed: 3, events: 49") != std::string::npos);
    CHECK(o.out.find("wisdom stored: yes") != std::string::npos);
    CHECK(fs::is_regular_file(dir / "run" / "run.json"));
    CHECK(load_wisdom_store(dir / "store").size() == 1);

    Outcome trace = cli({"trace", (dir / "run").string()});
    CHECK(trace.code == exit_code::kOk);
    CHECK(trace.out.find("trace: 24 rows") != std::string::npos);
    CHECK(trace.out.find("peak naive tokens: ") != std::string::npos);
}

TEST_CASE("usage and input errors exit 2") {
    TempDir dir;
    hcc::testing::write_text(dir / "task" / "data" / "x.csv", "a\n1\n");
    Outcome missing = cli({"run", (dir / "task").string(), "--config", toy("config.toml"), "--store",
                           (dir / "store").string(), "--run-dir", (dir / "run").string()});
    CHECK(missing.code == exit_code::kUsage);
    CHECK(missing.err.find("description.md") != std::string::npos);

    CHECK(cli({"run", toy("churn")}).code == exit_code::kUsage);  // --config is required
    CHECK(cli({"frobnicate"}).code == exit_code::kUsage);
    hcc::testing::write_text(dir / "bad.toml", "[run]\nstepLimit = lots\n");
    CHECK(cli({"run", toy("churn"), "--config", (dir / "bad.toml").string()}).code == exit_code::kUsage);
    CHECK(cli({"trace", (dir / "nowhere").string()}).code == exit_code::kUsage);
}

TEST_CASE("an aborted run exits 1") {
    TempDir dir;
    // a script without a working draft cannot bootstrap
    hcc::testing::write_text(dir / "script.json",
                             R"({"rules": [{"prompt": "Draft", "response": "no code here", "repeat": true},
                                           {"prompt": "Debug", "response": "still none", "repeat": true}]})");
    fs::copy_file(toy("env.json"), dir / "env.json");
    hcc::testing::write_text(dir / "config.toml",
                             "[generation]\nscript = script.json\n[run]\nclock = simulated\nmaxDebugRetries = 1\n"
                             "[env]\nkind = mock\ntable = env.json\n");
    Outcome o = cli({"run", toy("churn"), "--config", (dir / "config.toml").string(), "--store",
                     (dir / "store").string(), "--run-dir", (dir / "run").string()});
    CHECK(o.code == exit_code::kAborted);
    CHECK(o.out.find("stop reason: BootstrapExhausted") != std::string::npos);
}

TEST_CASE("record, replay, tamper") {
    TempDir dir;
    const std::string run = (dir / "run").string();
    CHECK(cli({"run", toy("churn"), "--config", toy("config.toml"), "--store", (dir / "store").string(), "--run-dir",
               run, "--record"})
              .code == exit_code::kOk);

    Outcome replay = cli({"replay", run});
    CHECK(replay.code == exit_code::kOk);
    CHECK(replay.out == "replay: 49 events identical, trace.csv identical\n");

    replace_once(dir / "run" / "events.jsonl", "IDEA_P2D1S1", "IDEA_P2D1S9");
    Outcome tampered = cli({"replay", run});
    CHECK(tampered.code == exit_code::kAborted);
    CHECK(tampered.err.find("diverges") != std::string::npos);
}

TEST_CASE("replay without recorded responses exits 2") {
    TempDir dir;
    const std::string run = (dir / "run").string();
    CHECK(cli({"run", toy("churn"), "--config", toy("config.toml"), "--store", (dir / "store").string(), "--run-dir",
               run})
              .code == exit_code::kOk);
    Outcome o = cli({"replay", run});
    CHECK(o.code == exit_code::kUsage);
    CHECK(o.err.find("--record") != std::string::npos);
    CHECK(cli({"replay", (dir / "missing").string()}).code == exit_code::kUsage);
}

TEST_CASE("warm populates the store and resumes by skipping stored tasks") {
    TempDir dir;
    const std::string store = (dir / "store").string();
    Outcome first = cli({"warm", corpus("tasks"), "--config", corpus("corpus.toml"), "--store", store, "--run-dir",
                         (dir / "runs").string()});
    CHECK(first.code == exit_code::kOk);
    CHECK(first.out.find("warm: 3 added, 0 skipped, 0 failed; store holds 3") != std::string::npos);

    Outcome second = cli({"warm", corpus("tasks"), "--config", corpus("corpus.toml"), "--store", store, "--run-dir",
                          (dir / "runs").string()});
    CHECK(second.code == exit_code::kOk);
    CHECK(second.out.find("warm: 0 added, 3 skipped") != std::string::npos);
    CHECK(second.out.find("churn-telco: already stored, skipped") != std::string::npos);

    Outcome list = cli({"store", "list", "--store", store});
    CHECK(list.code == exit_code::kOk);
    CHECK(list.out.find("3 entries, dimension 64") != std::string::npos);
    CHECK(list.out.find("house-prices\t") != std::string::npos);

    Outcome show = cli({"store", "show", "churn-telco", "--store", store});
    CHECK(show.out.find("== churn-telco\ndescriptor: Binary classification of telecom customer churn") !=
          std::string::npos);
    Outcome ranked = cli({"store", "show", "--store", store, "--query", "telecom customer churn",
                          "--config", corpus("corpus.toml")});
    CHECK(ranked.code == exit_code::kOk);
    CHECK(ranked.out.find("cosine\ttaskId\n") == 0);
    CHECK(ranked.out.find("\tchurn-telco\n") < ranked.out.find("\thouse-prices\n"));

    CHECK(cli({"store", "delete", "house-prices", "--store", store}).code == exit_code::kUsage);
    CHECK(cli({"store", "delete", "house-prices", "--store", store, "--yes"}).code == exit_code::kOk);
    CHECK(cli({"store", "delete", "house-prices", "--store", store, "--yes"}).code == exit_code::kUsage);
    CHECK(load_wisdom_store(store).size() == 2);
}

TEST_CASE("the installed binary maps exit codes") {
    TempDir dir;
    hcc::testing::write_text(dir / "task" / "data" / "x.csv", "a\n1\n");
    const std::string command = std::string(HCC_CLI_PATH) + " run " + (dir / "task").string() + " --config " +
                                toy("config.toml") + " --run-dir " + (dir / "run").string() + " > /dev/null 2>&1";
    const int status = std::system(command.c_str());
    REQUIRE(WIFEXITED(status));
    CHECK(WEXITSTATUS(status) == exit_code::kUsage);
    const int help = std::system((std::string(HCC_CLI_PATH) + " --help > /dev/null 2>&1").c_str());
    CHECK(WEXITSTATUS(help) == 0);
}
