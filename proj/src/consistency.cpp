#include "silicon/consistency.hpp"

#include "silicon/metrics.hpp"

#include <algorithm>
#include <map>

namespace silicon::consistency {

const ProfileEntry *LevelProfile::find(const SubgroupKey &key) const {
    for (const auto &e : entries) {
        if (e.key == key) return &e;
    }
    return nullptr;
}

std::vector<LevelProfile> build_level_profiles(probes::AnswerSource &model, const SurveyDataset &dataset,
                                               const std::string &question_id, std::span<const std::size_t> levels) {
    std::vector<LevelProfile> profiles;
    std::vector<probes::ProbeRequest> requests;
    std::vector<std::vector<SubgroupWeight>> populated;
    for (std::size_t level : levels) {
        if (level > dataset.schema().size()) {
            throw SurveyError("level " + std::to_string(level) + " exceeds the schema's " +
                              std::to_string(dataset.schema().size()) + " attributes");
        }
        populated.push_back(enumerate_subgroups(dataset, level, question_id));
        for (const auto &sub : populated.back()) requests.push_back({sub.key, question_id});
        profiles.push_back(LevelProfile{.question_id = question_id, .granularity = level, .entries = {}, .failures = {}});
    }

    const auto outcomes = model.probe(requests);
    std::size_t n = 0;
    for (std::size_t li = 0; li < profiles.size(); ++li) {
        for (const auto &sub : populated[li]) {
            const auto &outcome = outcomes[n++];
            if (outcome.ok()) {
                const auto &d = *outcome.record->distribution;
                profiles[li].entries.push_back({sub.key, sub.support_weight,
                                                AnswerDistribution(question_id, d.probs(), sub.support_weight),
                                                outcome.record->numeric_mass, outcome.record->refusal});
            } else {
                profiles[li].failures.push_back({sub.key, outcome.error.empty() ? "no distribution" : outcome.error});
            }
        }
    }
    return profiles;
}

double ConsistencyReport::max_divergence() const {
    double m = 0.0;
    for (const auto &d : divergences) m = std::max(m, d.tv);
    return m;
}

ConsistencyReport consistency_audit(std::span<const LevelProfile> profiles, const SurveyDataset &dataset) {
    if (profiles.size() < 2) throw SurveyError("consistency audit needs >= 2 levels");
    ConsistencyReport report;
    report.question_id = profiles.front().question_id;
    for (const auto &p : profiles) {
        if (p.question_id != report.question_id) throw SurveyError("profiles mix questions");
    }

    std::vector<const LevelProfile *> ordered;
    for (const auto &p : profiles) ordered.push_back(&p);
    std::sort(ordered.begin(), ordered.end(),
              [](const auto *a, const auto *b) { return a->granularity < b->granularity; });

    // Survey truth per key, computed once.
    std::map<SubgroupKey, AnswerDistribution> truth;
    auto truth_of = [&](const SubgroupKey &key) -> const AnswerDistribution & {
        auto it = truth.find(key);
        if (it == truth.end()) it = truth.emplace(key, empirical_distribution(dataset, report.question_id, key)).first;
        return it->second;
    };

    for (std::size_t ci = 0; ci < ordered.size(); ++ci) {
        const auto &coarse = *ordered[ci];
        for (const auto &entry : coarse.entries) {
            const auto &t = truth_of(entry.key);
            const double direct = metrics::accuracy(t, entry.distribution);
            report.path_accuracies.push_back({entry.key, std::nullopt, direct, direct});
        }
        for (std::size_t fi = ci + 1; fi < ordered.size(); ++fi) {
            const auto &fine = *ordered[fi];
            if (fine.granularity == coarse.granularity) continue;
            PairSummary summary{.coarse_level = coarse.granularity, .fine_level = fine.granularity};
            double weighted_tv = 0.0;
            double total_weight = 0.0;
            for (const auto &entry : coarse.entries) {
                std::vector<WeightedPart> parts;
                double score_sum = 0.0;
                for (const auto &f : fine.entries) {
                    if (!f.key.refines(entry.key)) continue;
                    parts.push_back({f.key, f.support_weight, f.distribution});
                    score_sum += f.support_weight * metrics::accuracy(truth_of(f.key), f.distribution);
                }
                if (parts.empty()) {
                    report.skipped.push_back({entry.key, fine.granularity, "no populated refinement with an answer"});
                    continue;
                }
                const auto mixed = aggregate(parts, entry.key);
                const double tv = metrics::tv_distance(entry.distribution, mixed);
                report.divergences.push_back({entry.key, fine.granularity, entry.support_weight, tv});
                report.path_accuracies.push_back({entry.key, fine.granularity,
                                                  metrics::accuracy(truth_of(entry.key), mixed),
                                                  score_sum / mixed.support_weight()});
                summary.max_tv = std::max(summary.max_tv, tv);
                weighted_tv += entry.support_weight * tv;
                total_weight += entry.support_weight;
                ++summary.keys;
            }
            summary.weighted_mean_tv = total_weight > 0.0 ? weighted_tv / total_weight : 0.0;
            report.summary.push_back(summary);
        }
    }
    return report;
}

AnswerDistribution synthetic_variation(probes::AnswerSource &model, const SurveyDataset &dataset,
                                       const std::string &question_id, const SubgroupKey &coarse,
                                       std::size_t refine_to) {
    coarse.validate(dataset.schema());
    if (refine_to <= coarse.granularity()) {
        throw SurveyError("refine_to must exceed the coarse key's granularity");
    }
    std::vector<probes::ProbeRequest> requests;
    std::vector<SubgroupWeight> refinements;
    for (auto &sub : enumerate_subgroups(dataset, refine_to, question_id)) {
        if (!sub.key.refines(coarse)) continue;
        requests.push_back({sub.key, question_id});
        refinements.push_back(std::move(sub));
    }
    if (refinements.empty()) throw EmptySubgroupError("no populated refinements of " + coarse.to_string());
    const auto outcomes = model.probe(requests);
    std::vector<WeightedPart> parts;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        if (!outcomes[i].ok()) {
            throw std::runtime_error("probe failed for " + refinements[i].key.to_string() + ": " + outcomes[i].error);
        }
        parts.push_back({refinements[i].key, refinements[i].support_weight, *outcomes[i].record->distribution});
    }
    return aggregate(parts, coarse);
}

} // namespace silicon::consistency
