#include "silicon/probe_cache.hpp"

#include "silicon/digest.hpp"

#include <algorithm>
#include <fstream>
#include <vector>

namespace silicon::probes {

using nlohmann::json;

json record_to_json(const ProbeRecord &record) {
    json doc{
        {"hash", record.hash},
        {"endpoint_id", record.endpoint_id},
        {"protocol", prompting::to_string(record.protocol)},
        {"prompt_digest", record.prompt_digest},
        {"key", record.key.to_string()},
        {"question_id", record.question_id},
        {"raw_response", record.raw_response},
        {"derived_probs", record.distribution ? json(record.distribution->probs()) : json(nullptr)},
        {"numeric_mass", record.numeric_mass},
        {"refusal", record.refusal},
        {"attempts", record.attempts},
        {"timestamp", record.timestamp},
    };
    return doc;
}

ProbeRecord record_from_json(const json &doc) {
    ProbeRecord rec;
    rec.hash = doc.at("hash").get<std::string>();
    rec.endpoint_id = doc.value("endpoint_id", "");
    rec.protocol = prompting::parse_protocol(doc.at("protocol").get<std::string>());
    rec.prompt_digest = doc.value("prompt_digest", "");
    rec.key = SubgroupKey::parse(doc.value("key", "*"));
    rec.question_id = doc.value("question_id", "");
    rec.raw_response = doc.value("raw_response", json(nullptr));
    if (doc.contains("derived_probs") && doc["derived_probs"].is_array()) {
        rec.distribution = AnswerDistribution(rec.question_id, doc["derived_probs"].get<std::vector<double>>(), 1.0);
    }
    rec.numeric_mass = doc.value("numeric_mass", 1.0);
    rec.refusal = doc.value("refusal", false);
    rec.attempts = doc.value("attempts", 0);
    rec.timestamp = doc.value("timestamp", "");
    return rec;
}

ProbeCache::ProbeCache(std::filesystem::path path) : path_(std::move(path)) {
    std::ifstream in(*path_);
    if (!in) {
        if (std::filesystem::exists(*path_)) throw CacheError("cannot read cache " + path_->string());
        return;
    }
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            auto rec = record_from_json(json::parse(line));
            auto hash = rec.hash;
            records_.insert_or_assign(std::move(hash), std::move(rec));
        } catch (const std::exception &e) {
            throw CacheError("corrupt cache line " + std::to_string(lineno) + " in " + path_->string() + ": " + e.what());
        }
    }
}

std::optional<ProbeRecord> ProbeCache::find(const std::string &hash) const {
    std::lock_guard lock(mutex_);
    auto it = records_.find(hash);
    if (it == records_.end()) return std::nullopt;
    return it->second;
}

void ProbeCache::append(const ProbeRecord &record) {
    const auto line = record_to_json(record).dump();
    std::lock_guard lock(mutex_);
    if (path_) {
        if (path_->has_parent_path()) {
            std::error_code ec;
            std::filesystem::create_directories(path_->parent_path(), ec);
        }
        std::ofstream out(*path_, std::ios::app | std::ios::binary);
        if (!out) throw CacheError("cannot open cache for append: " + path_->string());
        out << line << '\n';
        out.flush();
        if (!out) throw CacheError("write to cache failed: " + path_->string());
    }
    records_.insert_or_assign(record.hash, record);
}

std::size_t ProbeCache::size() const {
    std::lock_guard lock(mutex_);
    return records_.size();
}

std::string ProbeCache::digest() const {
    std::vector<std::string> entries;
    {
        std::lock_guard lock(mutex_);
        for (const auto &[hash, rec] : records_) {
            entries.push_back(hash + ":" + (rec.distribution ? json(rec.distribution->probs()).dump() : "null"));
        }
    }
    std::sort(entries.begin(), entries.end());
    std::string joined;
    for (const auto &e : entries) {
        joined += e;
        joined += '\n';
    }
    return sha256_hex(joined);
}

std::string ProbeCache::latest_timestamp() const {
    std::lock_guard lock(mutex_);
    std::string latest;
    for (const auto &[hash, rec] : records_) latest = std::max(latest, rec.timestamp);
    return latest;
}

} // namespace silicon::probes
