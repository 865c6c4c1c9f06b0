#pragma once

// Operator commands behind the `hcc` executable. Each returns a process exit
// code and writes human-readable output to the given streams.

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

#include "hcc/config.hpp"

namespace hcc {

namespace exit_code {
inline constexpr int kOk = 0;
/// Run aborted (no initial solution, no plan, failed promotion) or replay divergence.
inline constexpr int kAborted = 1;
/// Usage, config or I/O error.
inline constexpr int kUsage = 2;
inline constexpr int kInterrupted = 130;
}  // namespace exit_code

/// Command-line overrides applied on top of the config file.
struct Overrides {
    std::optional<std::filesystem::path> store;
    std::optional<std::uint64_t> seed;
    bool record = false;
    std::optional<double> budget_sec;
    std::optional<std::size_t> step_limit;
    std::optional<double> delta;
    std::optional<std::size_t> workers;
    std::optional<std::filesystem::path> run_dir;
};

/// Loads the config and applies overrides (recorded in Config::raw).
Config load_config_with(const std::filesystem::path& config_path, const Overrides& overrides);

int cmd_run(const std::filesystem::path& task_dir, const std::filesystem::path& config_path, const Overrides& overrides,
            std::ostream& out, std::ostream& err, const std::atomic<bool>* cancel = nullptr);

/// Warms the store from every task directory under `corpus_dir`, skipping
/// taskIds already stored. Per-task failures are reported and skipped.
int cmd_warm(const std::filesystem::path& corpus_dir, const std::filesystem::path& config_path,
             const Overrides& overrides, std::ostream& out, std::ostream& err, const std::atomic<bool>* cancel = nullptr);

int cmd_trace(const std::filesystem::path& run_dir, std::ostream& out, std::ostream& err);

int cmd_store_list(const std::filesystem::path& store_dir, std::ostream& out, std::ostream& err);
/// Entries (or one entry) in full; with a query, each row carries its cosine
/// similarity under the configured embedder.
int cmd_store_show(const std::filesystem::path& store_dir, const std::optional<std::string>& task_id,
                   const std::optional<std::string>& query, const std::optional<std::filesystem::path>& config_path,
                   std::ostream& out, std::ostream& err);
int cmd_store_delete(const std::filesystem::path& store_dir, const std::string& task_id, bool confirmed,
                     std::ostream& out, std::ostream& err);

/// Re-executes a recorded run from its usage ledger into `scratch_dir` (a
/// temporary directory when empty) and compares events.jsonl and trace.csv
/// byte for byte.
int cmd_replay(const std::filesystem::path& run_dir, std::ostream& out, std::ostream& err,
               const std::filesystem::path& scratch_dir = {});

/// Parses argv and dispatches.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err,
            const std::atomic<bool>* cancel = nullptr);

}  // namespace hcc
