#include "silicon/report.hpp"

#include "silicon/digest.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace silicon::report {

using nlohmann::json;

namespace {

void write_file(const std::filesystem::path &path, const std::string &text) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

/// Quotes a cell when it contains the delimiter, a quote or a newline.
std::string cell(const std::string &text) {
    if (text.find_first_of(",\"\n") == std::string::npos) return text;
    std::string out = "\"";
    for (char c : text) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

template <typename... Cells> std::string csv_line(const Cells &...cells) {
    std::string out;
    bool first = true;
    ((out += (first ? "" : ","), out += cells, first = false), ...);
    out += '\n';
    return out;
}

} // namespace

std::string format_number(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    if (ec != std::errc{}) return "nan";
    return {buf, ptr};
}

// ---------------------------------------------------------------------------
// RunConfig

json RunConfig::to_json() const {
    json levels_json = json::array();
    for (auto l : levels) levels_json.push_back(l);
    return json{
        {"survey", survey.string()},
        {"schema", schema.string()},
        {"questions", questions.string()},
        {"persona_template", persona_template.string()},
        {"models", models},
        {"question_ids", question_ids},
        {"levels", levels_json},
        {"weights", to_string(weight_mode)},
        {"vr_threshold", vr_threshold},
        {"cache", cache_path.string()},
        {"seed", seed},
    };
}

std::string RunConfig::hash() const { return sha256_hex(to_json().dump()); }

bool is_mock_spec(const std::string &model) { return model.rfind("mock:", 0) == 0; }

std::vector<std::string> RunConfig::selected_questions(const SurveyDataset &dataset) const {
    if (!question_ids.empty()) return question_ids;
    std::vector<std::string> out;
    for (const auto &q : dataset.questions()) out.push_back(q.id);
    return out;
}

void RunConfig::validate(const SurveyDataset &dataset) const {
    if (levels.empty()) throw std::invalid_argument("no granularity levels configured");
    std::set<std::size_t> seen;
    for (auto l : levels) {
        if (l > dataset.schema().size()) {
            throw std::invalid_argument("level " + std::to_string(l) + " exceeds schema size " +
                                        std::to_string(dataset.schema().size()));
        }
        if (!seen.insert(l).second) throw std::invalid_argument("duplicate level " + std::to_string(l));
    }
    if (!(vr_threshold > 0.0 && vr_threshold < 1.0)) throw std::invalid_argument("--vr-threshold must lie in (0,1)");
    for (const auto &q : question_ids) (void)dataset.question(q);
    std::set<std::string> ids;
    for (const auto &m : models) {
        if (!ids.insert(m).second) throw std::invalid_argument("model listed twice: " + m);
    }
}

// ---------------------------------------------------------------------------
// Audit

const Heatmap &AuditReport::heatmap(const std::string &question_id) const {
    for (const auto &h : heatmaps) {
        if (h.question_id == question_id) return h;
    }
    throw std::invalid_argument("unknown question '" + question_id + "' in report");
}

AuditReport run_audit(const RunConfig &config, const SurveyDataset &dataset,
                      std::span<probes::AnswerSource *const> sources, json manifest) {
    AuditReport report;
    report.manifest = std::move(manifest);
    std::vector<std::size_t> levels = config.levels;
    std::sort(levels.begin(), levels.end());
    const std::size_t summary_level = levels.back();

    if (levels.size() < 2) report.notes.emplace_back("consistency audit skipped: fewer than two levels configured");
    report.notes.emplace_back("weighted means use per-question support weights after dropping missing answers");

    for (const auto &qid : config.selected_questions(dataset)) {
        // Benchmarks come from survey truth only.
        const auto finest = enumerate_subgroups(dataset, summary_level, qid);
        std::vector<metrics::WeightedValue> mode_vals;
        std::vector<metrics::WeightedValue> self_vals;
        std::vector<metrics::WeightedValue> truth_vrs;
        Heatmap heat;
        heat.question_id = qid;
        heat.level = summary_level;
        heat.threshold = config.vr_threshold;
        std::map<SubgroupKey, std::size_t> heat_row;
        for (const auto &sub : finest) {
            const auto truth = empirical_distribution(dataset, qid, sub.key);
            const auto mode = metrics::mode_accuracy(truth);
            mode_vals.push_back({sub.support_weight, mode.value});
            self_vals.push_back({sub.support_weight, metrics::self_similarity(truth)});
            truth_vrs.push_back({sub.support_weight, 1.0 - mode.value});
            heat_row[sub.key] = heat.rows.size();
            heat.rows.push_back({sub.key, sub.support_weight, 1.0 - mode.value, {}});
        }
        heat.truth_tail = metrics::vr_tail_fraction(truth_vrs, config.vr_threshold, metrics::MeanMode::unweighted);

        for (auto *source : sources) {
            const auto profiles = consistency::build_level_profiles(*source, dataset, qid, levels);
            std::vector<metrics::WeightedValue> acc_vals;
            std::vector<metrics::WeightedValue> model_vrs;
            heat.model_ids.push_back(source->id());
            for (auto &row : heat.rows) row.model_vr.emplace_back(std::nullopt);

            for (const auto &profile : profiles) {
                for (const auto &f : profile.failures) {
                    report.probe_failures.push_back(source->id() + " " + qid + " " + f.key.to_string() + ": " + f.error);
                }
                for (const auto &entry : profile.entries) {
                    const auto truth = empirical_distribution(dataset, qid, entry.key);
                    auto m = metrics::subgroup_metrics(entry.key, truth, entry.distribution);
                    if (profile.granularity == summary_level) {
                        acc_vals.push_back({entry.support_weight, m.accuracy});
                        model_vrs.push_back({entry.support_weight, m.variation_ratio_model});
                        heat.rows[heat_row.at(entry.key)].model_vr.back() = m.variation_ratio_model;
                    }
                    report.subgroups.push_back(
                        {source->id(), profile.granularity, std::move(m), entry.numeric_mass, entry.refusal});
                }
            }
            if (!acc_vals.empty()) {
                report.summary.push_back({qid, source->id(), summary_level, acc_vals.size(),
                                          metrics::mean_accuracy(acc_vals, metrics::MeanMode::unweighted),
                                          metrics::mean_accuracy(acc_vals, metrics::MeanMode::weighted)});
                heat.model_tail.push_back(
                    metrics::vr_tail_fraction(model_vrs, config.vr_threshold, metrics::MeanMode::unweighted));
            } else {
                report.notes.push_back(source->id() + " produced no answers for " + qid);
                heat.model_tail.push_back(0.0);
            }
            if (profiles.size() >= 2) {
                report.consistency.push_back({source->id(), consistency::consistency_audit(profiles, dataset)});
            }
        }

        report.summary.push_back({qid, kModeRow, summary_level, mode_vals.size(),
                                  metrics::mean_accuracy(mode_vals, metrics::MeanMode::unweighted),
                                  metrics::mean_accuracy(mode_vals, metrics::MeanMode::weighted)});
        report.summary.push_back({qid, kSelfSimilarityRow, summary_level, self_vals.size(),
                                  metrics::mean_accuracy(self_vals, metrics::MeanMode::unweighted),
                                  metrics::mean_accuracy(self_vals, metrics::MeanMode::weighted)});
        report.heatmaps.push_back(std::move(heat));
    }
    return report;
}

// ---------------------------------------------------------------------------
// Serialization

json AuditReport::to_json() const {
    json subgroup_rows = json::array();
    for (const auto &r : subgroups) {
        const auto &m = r.metrics;
        subgroup_rows.push_back({
            {"model", r.model_id},
            {"question", m.question_id},
            {"level", r.level},
            {"key", m.key.to_string()},
            {"support_weight", m.support_weight},
            {"accuracy", m.accuracy},
            {"self_similarity", m.self_similarity},
            {"mode_accuracy", m.mode_accuracy},
            {"mode_option", m.mode_option},
            {"vr_truth", m.variation_ratio_truth},
            {"vr_model", m.variation_ratio_model},
            {"tv_vs_truth", m.tv_vs_truth},
            {"numeric_mass", r.numeric_mass},
            {"refusal", r.refusal},
        });
    }
    json summary_rows = json::array();
    for (const auto &s : summary) {
        summary_rows.push_back({{"question", s.question_id},
                                {"row", s.row},
                                {"level", s.level},
                                {"subgroups", s.subgroups},
                                {"unweighted", s.unweighted},
                                {"weighted", s.weighted}});
    }
    json consistency_json = json::array();
    for (const auto &mc : consistency) {
        json divs = json::array();
        for (const auto &d : mc.report.divergences) {
            divs.push_back({{"coarse", d.coarse.to_string()},
                            {"coarse_level", d.coarse.granularity()},
                            {"fine_level", d.fine_level},
                            {"support_weight", d.support_weight},
                            {"tv", d.tv}});
        }
        json paths = json::array();
        for (const auto &p : mc.report.path_accuracies) {
            paths.push_back({{"coarse", p.coarse.to_string()},
                             {"coarse_level", p.coarse.granularity()},
                             {"source", p.source_level ? json(*p.source_level) : json("direct")},
                             {"accuracy_distribution_first", p.distribution_first},
                             {"accuracy_score_average", p.score_average}});
        }
        json pairs = json::array();
        for (const auto &s : mc.report.summary) {
            pairs.push_back({{"coarse_level", s.coarse_level},
                             {"fine_level", s.fine_level},
                             {"keys", s.keys},
                             {"max_tv", s.max_tv},
                             {"weighted_mean_tv", s.weighted_mean_tv}});
        }
        json skipped = json::array();
        for (const auto &s : mc.report.skipped) {
            skipped.push_back({{"coarse", s.coarse.to_string()}, {"fine_level", s.fine_level}, {"reason", s.reason}});
        }
        consistency_json.push_back({{"model", mc.model_id},
                                    {"question", mc.report.question_id},
                                    {"max_tv", mc.report.max_divergence()},
                                    {"pairs", pairs},
                                    {"divergences", divs},
                                    {"path_accuracy", paths},
                                    {"skipped", skipped}});
    }
    json heat_json = json::array();
    for (const auto &h : heatmaps) {
        json rows = json::array();
        for (const auto &r : h.rows) {
            json vr = json::array();
            for (const auto &v : r.model_vr) vr.push_back(v ? json(*v) : json(nullptr));
            rows.push_back({{"key", r.key.to_string()},
                            {"support_weight", r.support_weight},
                            {"truth_vr", r.truth_vr},
                            {"model_vr", vr}});
        }
        heat_json.push_back({{"question", h.question_id},
                             {"level", h.level},
                             {"threshold", h.threshold},
                             {"models", h.model_ids},
                             {"rows", rows},
                             {"truth_tail", h.truth_tail},
                             {"model_tail", h.model_tail}});
    }
    return json{
        {"manifest", manifest},
        {"summary", summary_rows},
        {"subgroups", subgroup_rows},
        {"consistency", consistency_json},
        {"heatmaps", heat_json},
        {"probe_failures", probe_failures},
        {"notes", notes},
    };
}

std::string emit_heatmap_matrix(const AuditReport &report, const std::string &question_id) {
    const auto &h = report.heatmap(question_id);
    std::string out = "key,support_weight,truth_vr";
    for (const auto &m : h.model_ids) out += "," + cell(m);
    out += '\n';
    for (const auto &r : h.rows) {
        out += cell(r.key.to_string()) + "," + format_number(r.support_weight) + "," + format_number(r.truth_vr);
        for (const auto &v : r.model_vr) out += "," + (v ? format_number(*v) : std::string("NA"));
        out += '\n';
    }
    out += cell("P(VR<" + format_number(h.threshold) + ")") + ",," + format_number(h.truth_tail);
    for (double t : h.model_tail) out += "," + format_number(t);
    out += '\n';
    return out;
}

std::string summary_csv(const AuditReport &report) {
    std::string out = csv_line("question", "row", "level", "subgroups", "unweighted", "weighted");
    for (const auto &s : report.summary) {
        out += csv_line(cell(s.question_id), cell(s.row), std::to_string(s.level), std::to_string(s.subgroups),
                        format_number(s.unweighted), format_number(s.weighted));
    }
    return out;
}

std::string subgroups_csv(const AuditReport &report) {
    std::string out = csv_line("model", "question", "level", "key", "support_weight", "accuracy", "self_similarity",
                               "mode_accuracy", "mode_option", "vr_truth", "vr_model", "tv_vs_truth", "numeric_mass",
                               "refusal");
    for (const auto &r : report.subgroups) {
        const auto &m = r.metrics;
        out += csv_line(cell(r.model_id), cell(m.question_id), std::to_string(r.level), cell(m.key.to_string()),
                        format_number(m.support_weight), format_number(m.accuracy), format_number(m.self_similarity),
                        format_number(m.mode_accuracy), std::to_string(m.mode_option),
                        format_number(m.variation_ratio_truth), format_number(m.variation_ratio_model),
                        format_number(m.tv_vs_truth), format_number(r.numeric_mass),
                        std::string(r.refusal ? "1" : "0"));
    }
    return out;
}

std::string consistency_csv(const AuditReport &report) {
    std::string out = csv_line("model", "question", "coarse_level", "fine_level", "coarse", "support_weight", "tv");
    for (const auto &mc : report.consistency) {
        for (const auto &d : mc.report.divergences) {
            out += csv_line(cell(mc.model_id), cell(mc.report.question_id), std::to_string(d.coarse.granularity()),
                            std::to_string(d.fine_level), cell(d.coarse.to_string()), format_number(d.support_weight),
                            format_number(d.tv));
        }
    }
    return out;
}

void write_json(const AuditReport &report, const std::filesystem::path &out_dir) {
    write_file(out_dir / "report.json", report.to_json().dump(2) + "\n");
}

void write_csv(const AuditReport &report, const std::filesystem::path &out_dir) {
    write_file(out_dir / "summary.csv", summary_csv(report));
    write_file(out_dir / "subgroups.csv", subgroups_csv(report));
    write_file(out_dir / "consistency.csv", consistency_csv(report));
    for (const auto &h : report.heatmaps) {
        write_file(out_dir / ("heatmap_" + h.question_id + ".csv"), emit_heatmap_matrix(report, h.question_id));
    }
}

void write_manifest(const AuditReport &report, const std::filesystem::path &out_dir) {
    write_file(out_dir / "manifest.json", report.manifest.dump(2) + "\n");
}

} // namespace silicon::report
