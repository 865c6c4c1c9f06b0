#include "hcc/wisdom_store.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "hcc/error.hpp"

namespace hcc {

namespace fs = std::filesystem;

namespace {

constexpr double kUnitTolerance = 1e-6;

double norm(std::span<const double> v) {
    double sum = 0.0;
    for (double x : v) sum += x * x;
    return std::sqrt(sum);
}

void write_atomically(const fs::path& path, const std::string& content) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail(Errc::IoFailure, "cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out) fail(Errc::IoFailure, "short write to " + tmp.string());
    }
    fs::rename(tmp, path);
}

}  // namespace

double cosine(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size())
        fail(Errc::DimensionMismatch, std::to_string(u.size()) + " vs " + std::to_string(v.size()));
    double dot = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) dot += u[i] * v[i];
    const double nu = norm(u);
    const double nv = norm(v);
    if (nu == 0.0 || nv == 0.0) fail(Errc::ZeroVector, "cosine of a zero vector");
    return std::clamp(dot / (nu * nv), -1.0, 1.0);
}

Vector normalized(std::span<const double> v) {
    const double n = norm(v);
    if (n == 0.0 || !std::isfinite(n)) fail(Errc::ZeroVector, "cannot normalize");
    Vector out(v.begin(), v.end());
    for (double& x : out) x /= n;
    return out;
}

const WisdomEntry* WisdomStore::find(const std::string& task_id) const {
    for (const auto& entry : entries_)
        if (entry.task_id == task_id) return &entry;
    return nullptr;
}

void WisdomStore::insert(std::string task_id, std::string descriptor, std::span<const double> embedding,
                         std::string wisdom, OverwritePolicy policy) {
    if (embedding.size() != dimension_) {
        fail(Errc::DimensionMismatch, "embedding of dimension " + std::to_string(embedding.size()) +
                                          " into store of dimension " + std::to_string(dimension_));
    }
    if (task_id.empty() || descriptor.empty() || wisdom.empty())
        fail(Errc::PreconditionFailed, "task id, descriptor and wisdom must be non-empty");
    WisdomEntry entry{std::move(task_id), std::move(descriptor), normalized(embedding), std::move(wisdom)};
    auto existing = std::find_if(entries_.begin(), entries_.end(),
                                 [&](const WisdomEntry& e) { return e.task_id == entry.task_id; });
    if (existing != entries_.end()) {
        if (policy == OverwritePolicy::Reject) fail(Errc::DuplicateTask, existing->task_id);
        *existing = std::move(entry);
    } else {
        entries_.push_back(std::move(entry));
    }
    ++version_;
}

void WisdomStore::erase(const std::string& task_id) {
    auto it = std::find_if(entries_.begin(), entries_.end(), [&](const WisdomEntry& e) { return e.task_id == task_id; });
    if (it == entries_.end()) fail(Errc::UnknownTask, task_id);
    entries_.erase(it);
    ++version_;
}

std::vector<PrefetchHit> WisdomStore::prefetch(std::span<const double> query, double delta,
                                               std::size_t max_results) const {
    if (query.size() != dimension_) {
        fail(Errc::DimensionMismatch, "query of dimension " + std::to_string(query.size()) + " against store of " +
                                          std::to_string(dimension_));
    }
    std::vector<PrefetchHit> hits;
    if (entries_.empty()) return hits;
    for (const auto& entry : entries_) {
        double similarity = cosine(query, entry.embedding);
        if (similarity > delta) hits.push_back({&entry, similarity});
    }
    // stable: equal similarities keep insertion order
    std::stable_sort(hits.begin(), hits.end(),
                     [](const PrefetchHit& a, const PrefetchHit& b) { return a.similarity > b.similarity; });
    if (hits.size() > max_results) hits.resize(max_results);
    return hits;
}

// ---- persistence ----------------------------------------------------------

bool wisdom_store_exists(const fs::path& dir) { return fs::exists(dir / "wisdom.meta.json"); }

WisdomStore load_wisdom_store(const fs::path& dir) {
    std::ifstream meta_in(dir / "wisdom.meta.json", std::ios::binary);
    if (!meta_in) fail(Errc::CorruptStore, "missing " + (dir / "wisdom.meta.json").string());
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(meta_in);
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::CorruptStore, std::string("wisdom.meta.json: ") + e.what());
    }
    std::size_t dimension = 0, version = 0, count = 0;
    try {
        dimension = meta.at("dimension").get<std::size_t>();
        version = meta.at("version").get<std::size_t>();
        count = meta.at("count").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::CorruptStore, std::string("wisdom.meta.json: ") + e.what());
    }

    WisdomStore store(dimension);
    std::ifstream in(dir / "wisdom.jsonl", std::ios::binary);
    if (!in) fail(Errc::CorruptStore, "missing " + (dir / "wisdom.jsonl").string());
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty()) continue;
        WisdomEntry entry;
        try {
            auto json = nlohmann::json::parse(line);
            entry.task_id = json.at("taskId").get<std::string>();
            entry.descriptor = json.at("descriptor").get<std::string>();
            entry.embedding = json.at("embedding").get<Vector>();
            entry.wisdom = json.at("wisdom").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            fail(Errc::CorruptStore, "wisdom.jsonl:" + std::to_string(line_number) + ": " + e.what());
        }
        if (entry.embedding.size() != dimension) {
            fail(Errc::DimensionMismatch, "wisdom.jsonl:" + std::to_string(line_number) + ": dimension " +
                                              std::to_string(entry.embedding.size()) + ", store has " +
                                              std::to_string(dimension));
        }
        if (std::abs(norm(entry.embedding) - 1.0) > kUnitTolerance)
            fail(Errc::CorruptStore, "wisdom.jsonl:" + std::to_string(line_number) + ": embedding not unit-norm");
        if (entry.task_id.empty() || entry.descriptor.empty() || entry.wisdom.empty())
            fail(Errc::CorruptStore, "wisdom.jsonl:" + std::to_string(line_number) + ": empty field");
        if (store.find(entry.task_id))
            fail(Errc::CorruptStore, "wisdom.jsonl: duplicate task " + entry.task_id);
        store.entries_.push_back(std::move(entry));
    }
    if (store.entries_.size() != count) {
        fail(Errc::CorruptStore, "wisdom.meta.json says " + std::to_string(count) + " entries, found " +
                                     std::to_string(store.entries_.size()));
    }
    store.version_ = version;
    return store;
}

void save_wisdom_store(const WisdomStore& store, const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) fail(Errc::IoFailure, "cannot create " + dir.string() + ": " + ec.message());
    std::string lines;
    for (const auto& entry : store.entries()) {
        nlohmann::ordered_json json;
        json["taskId"] = entry.task_id;
        json["descriptor"] = entry.descriptor;
        json["embedding"] = entry.embedding;
        json["wisdom"] = entry.wisdom;
        lines += json.dump();
        lines += '\n';
    }
    nlohmann::ordered_json meta;
    meta["dimension"] = store.dimension();
    meta["version"] = store.version();
    meta["count"] = store.size();
    // entries first: a crash between the two renames leaves a count mismatch, which load reports
    write_atomically(dir / "wisdom.jsonl", lines);
    write_atomically(dir / "wisdom.meta.json", meta.dump() + "\n");
}

WisdomStore open_or_create(const fs::path& dir, std::size_t dimension) {
    if (!wisdom_store_exists(dir)) return WisdomStore(dimension);
    WisdomStore store = load_wisdom_store(dir);
    if (store.dimension() != dimension) {
        fail(Errc::DimensionMismatch, "store at " + dir.string() + " has dimension " +
                                          std::to_string(store.dimension()) + ", embedder reports " +
                                          std::to_string(dimension));
    }
    return store;
}

WisdomRepository::WisdomRepository(WisdomStore store, std::optional<fs::path> dir)
    : store_(std::move(store)), dir_(std::move(dir)) {}

WisdomStore WisdomRepository::snapshot() const {
    std::lock_guard lock(mutex_);
    return store_;
}

void WisdomRepository::insert(std::string task_id, std::string descriptor, std::span<const double> embedding,
                              std::string wisdom, OverwritePolicy policy) {
    std::lock_guard lock(mutex_);
    WisdomStore next = store_;
    next.insert(std::move(task_id), std::move(descriptor), embedding, std::move(wisdom), policy);
    if (dir_) save_wisdom_store(next, *dir_);
    store_ = std::move(next);
}

void WisdomRepository::erase(const std::string& task_id) {
    std::lock_guard lock(mutex_);
    WisdomStore next = store_;
    next.erase(task_id);
    if (dir_) save_wisdom_store(next, *dir_);
    store_ = std::move(next);
}

}  // namespace hcc
