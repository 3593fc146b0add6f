#pragma once

#include "silicon/probes.hpp"

#include <filesystem>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>

namespace silicon::probes {

class CacheError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Append-only JSON-lines store of ProbeRecords keyed by probe hash.
/// Reads are lock-protected; appends are serialized and flushed per record.
/// The last line for a hash wins.
class ProbeCache {
public:
    /// In-memory cache (nothing persisted).
    ProbeCache() = default;
    /// Loads `path` if it exists; appends go to the same file.
    explicit ProbeCache(std::filesystem::path path);

    ProbeCache(const ProbeCache &) = delete;
    ProbeCache &operator=(const ProbeCache &) = delete;

    [[nodiscard]] std::optional<ProbeRecord> find(const std::string &hash) const;
    void append(const ProbeRecord &record);
    [[nodiscard]] std::size_t size() const;
    /// SHA-256 over the records' hashes and derived distributions, order-independent.
    [[nodiscard]] std::string digest() const;
    /// Latest record timestamp (empty if the cache is empty).
    [[nodiscard]] std::string latest_timestamp() const;

    [[nodiscard]] const std::optional<std::filesystem::path> &path() const { return path_; }

private:
    std::optional<std::filesystem::path> path_;
    mutable std::mutex mutex_;
    std::unordered_map<std::string, ProbeRecord> records_;
};

[[nodiscard]] nlohmann::json record_to_json(const ProbeRecord &record);
[[nodiscard]] ProbeRecord record_from_json(const nlohmann::json &doc);

} // namespace silicon::probes
