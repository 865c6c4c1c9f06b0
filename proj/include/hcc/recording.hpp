#pragma once

// usage.jsonl: per-call usage accounting, and in record mode the full
// inputs a run consumed (model responses, embeddings, execution reports,
// budget decisions, prefetched wisdom) so the run can be replayed.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

namespace hcc {

class UsageLedger {
public:
    /// Without a path the ledger only hands out sequence numbers.
    explicit UsageLedger(std::optional<std::filesystem::path> path = std::nullopt, bool record = false);

    bool recording() const noexcept { return record_; }

    /// Per (channel, thread) call counter, starting at 0.
    std::uint64_t next_sequence(const std::string& channel, const std::string& thread);

    void append(const nlohmann::json& line);

private:
    std::mutex mutex_;
    std::optional<std::ofstream> out_;
    bool record_;
    std::map<std::pair<std::string, std::string>, std::uint64_t> sequences_;
};

/// Indexed view over a recorded usage.jsonl.
class ReplayLog {
public:
    /// Throws CorruptRun on unreadable lines.
    static std::shared_ptr<ReplayLog> load(const std::filesystem::path& path);

    /// True when the file holds at least one recorded generation response.
    bool has_recorded_responses() const noexcept { return recorded_generations_ > 0; }

    /// Entry for (channel, thread, seq); nullptr when absent.
    const nlohmann::json* find(const std::string& channel, const std::string& thread, std::uint64_t seq) const;

    const std::vector<nlohmann::json>& prefetched_entries() const noexcept { return prefetched_; }

    std::uint64_t next_sequence(const std::string& channel, const std::string& thread);

private:
    std::map<std::tuple<std::string, std::string, std::uint64_t>, nlohmann::json> entries_;
    std::vector<nlohmann::json> prefetched_;
    std::size_t recorded_generations_ = 0;
    std::mutex mutex_;
    std::map<std::pair<std::string, std::string>, std::uint64_t> sequences_;
};

}  // namespace hcc
