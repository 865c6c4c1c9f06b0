#include "hcc/recording.hpp"

#include "hcc/error.hpp"

namespace hcc {

UsageLedger::UsageLedger(std::optional<std::filesystem::path> path, bool record) : record_(record) {
    if (path) {
        out_.emplace(*path, std::ios::app | std::ios::binary);
        if (!*out_) fail(Errc::IoFailure, "cannot open " + path->string());
    }
}

std::uint64_t UsageLedger::next_sequence(const std::string& channel, const std::string& thread) {
    std::lock_guard lock(mutex_);
    return sequences_[{channel, thread}]++;
}

void UsageLedger::append(const nlohmann::json& line) {
    std::lock_guard lock(mutex_);
    if (!out_) return;
    *out_ << line.dump() << '\n';
    out_->flush();
}

std::shared_ptr<ReplayLog> ReplayLog::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::CorruptRun, "missing " + path.string());
    auto owned = std::make_shared<ReplayLog>();
    ReplayLog& log = *owned;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty()) continue;
        nlohmann::json json;
        try {
            json = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception&) {
            fail(Errc::CorruptRun, path.string() + ":" + std::to_string(line_number) + ": not JSON");
        }
        const std::string type = json.value("type", "");
        if (type == "prefetch") {
            if (json.contains("entries")) log.prefetched_ = json["entries"].get<std::vector<nlohmann::json>>();
            continue;
        }
        if (!json.contains("thread") || !json.contains("seq")) continue;
        if (type == "generation" && json.contains("response")) ++log.recorded_generations_;
        auto key = std::make_tuple(type, json["thread"].get<std::string>(), json["seq"].get<std::uint64_t>());
        log.entries_[key] = std::move(json);
    }
    return owned;
}

const nlohmann::json* ReplayLog::find(const std::string& channel, const std::string& thread, std::uint64_t seq) const {
    auto it = entries_.find(std::make_tuple(channel, thread, seq));
    return it == entries_.end() ? nullptr : &it->second;
}

std::uint64_t ReplayLog::next_sequence(const std::string& channel, const std::string& thread) {
    std::lock_guard lock(mutex_);
    return sequences_[{channel, thread}]++;
}

}  // namespace hcc
