#pragma once

#include "silicon/answer_source.hpp"
#include "silicon/consistency.hpp"
#include "silicon/metrics.hpp"
#include "silicon/survey.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace silicon::report {

struct RunConfig {
    std::filesystem::path survey;
    std::filesystem::path schema;
    std::filesystem::path questions;
    /// Persona template file; empty selects the built-in ANES template.
    std::filesystem::path persona_template;
    /// "mock:NAME[:gamma]" or a path to an endpoint JSON file.
    std::vector<std::string> models;
    /// Question ids to run; empty means every question in the questions file.
    std::vector<std::string> question_ids;
    std::vector<std::size_t> levels{0, 1, 2, 3, 4};
    WeightMode weight_mode = WeightMode::column;
    double vr_threshold = metrics::kDefaultVrThreshold;
    std::filesystem::path out_dir = "out";
    std::filesystem::path cache_path = "probe_cache.jsonl";
    std::uint64_t seed = 2020;

    /// Everything except the output directory, in a stable key order.
    [[nodiscard]] nlohmann::json to_json() const;
    [[nodiscard]] std::string hash() const;
    /// Throws std::invalid_argument on inconsistent settings.
    void validate(const SurveyDataset &dataset) const;
    [[nodiscard]] std::vector<std::string> selected_questions(const SurveyDataset &dataset) const;
};

[[nodiscard]] bool is_mock_spec(const std::string &model);

struct SubgroupRow {
    std::string model_id;
    std::size_t level = 0;
    metrics::SubgroupMetrics metrics;
    double numeric_mass = 1.0;
    bool refusal = false;
};

struct SummaryRow {
    std::string question_id;
    /// Model id, or "benchmark:mode" / "benchmark:self-similarity".
    std::string row;
    std::size_t level = 0;
    std::size_t subgroups = 0;
    double unweighted = 0.0;
    double weighted = 0.0;
};

inline constexpr const char *kModeRow = "benchmark:mode";
inline constexpr const char *kSelfSimilarityRow = "benchmark:self-similarity";

struct HeatmapRow {
    SubgroupKey key;
    double support_weight = 0.0;
    double truth_vr = 0.0;
    /// One entry per model column; nullopt where the probe failed.
    std::vector<std::optional<double>> model_vr;
};

struct Heatmap {
    std::string question_id;
    std::size_t level = 0;
    double threshold = metrics::kDefaultVrThreshold;
    std::vector<std::string> model_ids;
    std::vector<HeatmapRow> rows;
    double truth_tail = 0.0;
    std::vector<double> model_tail;
};

struct ModelConsistency {
    std::string model_id;
    consistency::ConsistencyReport report;
};

struct AuditReport {
    nlohmann::json manifest;
    std::vector<SubgroupRow> subgroups;
    std::vector<SummaryRow> summary;
    std::vector<ModelConsistency> consistency;
    std::vector<Heatmap> heatmaps;
    std::vector<std::string> probe_failures;
    std::vector<std::string> notes;

    [[nodiscard]] nlohmann::json to_json() const;
    [[nodiscard]] const Heatmap &heatmap(const std::string &question_id) const;
};

/// Scores every source against survey truth at each configured level,
/// runs the consistency audit and builds the summary and heatmap tables.
/// Benchmark rows use survey truth only.
[[nodiscard]] AuditReport run_audit(const RunConfig &config, const SurveyDataset &dataset,
                                    std::span<probes::AnswerSource *const> sources, nlohmann::json manifest);

/// Delimited text, one row per subgroup (schema order) plus a footer with
/// P(VR < threshold) per column.
[[nodiscard]] std::string emit_heatmap_matrix(const AuditReport &report, const std::string &question_id);
[[nodiscard]] std::string summary_csv(const AuditReport &report);
[[nodiscard]] std::string subgroups_csv(const AuditReport &report);
[[nodiscard]] std::string consistency_csv(const AuditReport &report);

/// report.json
void write_json(const AuditReport &report, const std::filesystem::path &out_dir);
/// summary.csv, subgroups.csv, consistency.csv, heatmap_<question>.csv
void write_csv(const AuditReport &report, const std::filesystem::path &out_dir);
/// manifest.json
void write_manifest(const AuditReport &report, const std::filesystem::path &out_dir);

/// Shortest round-trip decimal form.
[[nodiscard]] std::string format_number(double value);

} // namespace silicon::report
