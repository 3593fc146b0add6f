#pragma once

#include "silicon/answer_source.hpp"
#include "silicon/survey.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace silicon::consistency {

struct ProfileEntry {
    SubgroupKey key;
    /// Survey support weight of the subgroup (never model-derived).
    double support_weight = 0.0;
    AnswerDistribution distribution;
    double numeric_mass = 1.0;
    bool refusal = false;
};

struct ProbeFailure {
    SubgroupKey key;
    std::string error;
};

/// Model answers for every populated subgroup at one granularity.
struct LevelProfile {
    std::string question_id;
    std::size_t granularity = 0;
    std::vector<ProfileEntry> entries;
    std::vector<ProbeFailure> failures;

    [[nodiscard]] const ProfileEntry *find(const SubgroupKey &key) const;
};

/// Probes each populated subgroup at each requested level once, as a single
/// batch, and attaches survey support weights.
[[nodiscard]] std::vector<LevelProfile> build_level_profiles(probes::AnswerSource &model, const SurveyDataset &dataset,
                                                             const std::string &question_id,
                                                             std::span<const std::size_t> levels);

struct Divergence {
    SubgroupKey coarse;
    std::size_t fine_level = 0;
    double support_weight = 0.0;
    /// TV distance between the direct coarse answer and the support-weighted
    /// mixture of the fine answers refining it.
    double tv = 0.0;
};

/// Accuracy against the survey at a coarse key, by route.
struct PathAccuracy {
    SubgroupKey coarse;
    /// nullopt for the direct probe; otherwise the level aggregated from.
    std::optional<std::size_t> source_level;
    /// Aggregate distributions first, then score against the coarse truth.
    double distribution_first = 0.0;
    /// Score each fine subgroup against its own truth, then weight-average.
    double score_average = 0.0;
};

struct PairSummary {
    std::size_t coarse_level = 0;
    std::size_t fine_level = 0;
    std::size_t keys = 0;
    double max_tv = 0.0;
    double weighted_mean_tv = 0.0;
};

struct SkippedKey {
    SubgroupKey coarse;
    std::size_t fine_level = 0;
    std::string reason;
};

struct ConsistencyReport {
    std::string question_id;
    std::vector<Divergence> divergences;
    std::vector<PathAccuracy> path_accuracies;
    std::vector<PairSummary> summary;
    std::vector<SkippedKey> skipped;

    [[nodiscard]] double max_divergence() const;
};

/// Compares each coarse level's direct answers with answers aggregated up
/// from every finer level. Needs at least two profiles of one question.
[[nodiscard]] ConsistencyReport consistency_audit(std::span<const LevelProfile> profiles, const SurveyDataset &dataset);

/// Probes every populated refinement of `coarse` at `refine_to` and returns
/// their support-weighted mixture.
[[nodiscard]] AnswerDistribution synthetic_variation(probes::AnswerSource &model, const SurveyDataset &dataset,
                                                     const std::string &question_id, const SubgroupKey &coarse,
                                                     std::size_t refine_to);

// ---------------------------------------------------------------------------
// Mode optimality

/// Expected match between a belief drawn from `p` and an answer drawn from
/// strategy `q`. Same function as metrics::accuracy.
[[nodiscard]] double expected_match(const AnswerDistribution &p, const AnswerDistribution &q);

struct OptimalityReport {
    std::size_t strategies_checked = 0;
    double mode_value = 0.0;
    int mode_option = 1;
    double max_observed = 0.0;
    std::vector<double> argmax_strategy;
    bool bound_holds = true;
    bool mode_attains_max = true;
    std::vector<std::string> failures;

    [[nodiscard]] bool passed() const { return bound_holds && mode_attains_max; }
};

/// Checks U(q) <= max_j p_j over `trials` Dirichlet(1) strategies plus all
/// K vertex strategies.
[[nodiscard]] OptimalityReport verify_mode_optimality(const AnswerDistribution &p, std::size_t trials,
                                                      std::uint64_t seed);

/// Fraction of n independent (belief ~ p, answer ~ q) draws that agree.
[[nodiscard]] double simulate_match_rate(const AnswerDistribution &p, const AnswerDistribution &q, std::size_t n,
                                         std::uint64_t seed);

struct TheoremSuiteResult {
    std::size_t distributions = 0;
    std::size_t strategies = 0;
    std::size_t failures = 0;
    /// Largest U(q) - max_j p_j seen; <= 0 when the bound holds everywhere.
    double max_excess = 0.0;

    [[nodiscard]] bool passed() const { return failures == 0; }
};

/// verify_mode_optimality over `distributions` random p with K cycling
/// through 2..6, each against `trials` random strategies.
[[nodiscard]] TheoremSuiteResult run_theorem_suite(std::size_t distributions, std::size_t trials, std::uint64_t seed);

struct ConvergencePoint {
    std::size_t n = 0;
    double estimate = 0.0;
    double expected = 0.0;
    /// Binomial standard error sqrt(U (1 - U) / n).
    double sigma = 0.0;

    [[nodiscard]] bool within(double sigmas) const;
};

[[nodiscard]] std::vector<ConvergencePoint> match_rate_convergence(const AnswerDistribution &p,
                                                                   const AnswerDistribution &q,
                                                                   std::span<const std::size_t> sample_sizes,
                                                                   std::uint64_t seed);

} // namespace silicon::consistency
