#pragma once

// L3 prior-wisdom cache: embedded task descriptors with distilled wisdom,
// retrieved by cosine threshold.

#include <cstddef>
#include <filesystem>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hcc {

using Vector = std::vector<double>;

/// dot(u,v) / (|u||v|). Throws DimensionMismatch, ZeroVector.
double cosine(std::span<const double> u, std::span<const double> v);

/// Throws ZeroVector.
Vector normalized(std::span<const double> v);

struct WisdomEntry {
    std::string task_id;
    std::string descriptor;
    Vector embedding;
    std::string wisdom;

    bool operator==(const WisdomEntry&) const = default;
};

struct PrefetchHit {
    const WisdomEntry* entry = nullptr;
    double similarity = 0.0;
};

enum class OverwritePolicy { Reject, Replace };

class WisdomStore {
public:
    explicit WisdomStore(std::size_t dimension) : dimension_(dimension) {}

    std::size_t dimension() const noexcept { return dimension_; }
    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    std::size_t version() const noexcept { return version_; }
    std::span<const WisdomEntry> entries() const noexcept { return entries_; }

    const WisdomEntry* find(const std::string& task_id) const;

    /// Stores the embedding unit-normalized and bumps the version.
    /// Throws DimensionMismatch, DuplicateTask (Reject), ZeroVector, PreconditionFailed.
    void insert(std::string task_id, std::string descriptor, std::span<const double> embedding, std::string wisdom,
                OverwritePolicy policy = OverwritePolicy::Reject);

    /// Throws UnknownTask.
    void erase(const std::string& task_id);

    /// Ω_τ: entries with cos(query, h_n) > delta (strict), by descending
    /// similarity, at most `max_results`. Never mutates the store.
    std::vector<PrefetchHit> prefetch(std::span<const double> query, double delta, std::size_t max_results) const;

    bool operator==(const WisdomStore&) const = default;

    friend WisdomStore load_wisdom_store(const std::filesystem::path& dir);

private:
    std::size_t dimension_;
    std::size_t version_ = 0;
    std::vector<WisdomEntry> entries_;
};

/// Directory layout: wisdom.jsonl (one entry per line) + wisdom.meta.json
/// {dimension, version, count}. Throws CorruptStore, DimensionMismatch.
WisdomStore load_wisdom_store(const std::filesystem::path& dir);
void save_wisdom_store(const WisdomStore& store, const std::filesystem::path& dir);
bool wisdom_store_exists(const std::filesystem::path& dir);

/// Loads when present, otherwise an empty store of the given dimension.
WisdomStore open_or_create(const std::filesystem::path& dir, std::size_t dimension);

/// Single-writer handle over a store persisted on disk. Readers take
/// snapshots; insert/erase write through.
class WisdomRepository {
public:
    WisdomRepository(WisdomStore store, std::optional<std::filesystem::path> dir);

    WisdomStore snapshot() const;
    void insert(std::string task_id, std::string descriptor, std::span<const double> embedding, std::string wisdom,
                OverwritePolicy policy);
    void erase(const std::string& task_id);
    const std::optional<std::filesystem::path>& dir() const noexcept { return dir_; }

private:
    mutable std::mutex mutex_;
    WisdomStore store_;
    std::optional<std::filesystem::path> dir_;
};

}  // namespace hcc
