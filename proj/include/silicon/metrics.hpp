#pragma once

#include "silicon/survey.hpp"

#include <string>
#include <vector>

namespace silicon::metrics {

/// Default threshold for the low-variation tail statistic. The cut-off is a
/// convention, not a derived quantity.
inline constexpr double kDefaultVrThreshold = 0.05;

enum class MeanMode { unweighted, weighted };

struct ModeResult {
    double value = 0.0;
    int option = 1; ///< 1-based; ties resolve to the lowest index
};

/// Expected match rate between an answer drawn from `p` and one drawn from `q`: sum_j p_j q_j.
[[nodiscard]] double accuracy(const AnswerDistribution &p, const AnswerDistribution &q);
/// Sum of squared probabilities; the score of a perfectly representative model.
[[nodiscard]] double self_similarity(const AnswerDistribution &p);
[[nodiscard]] ModeResult mode_accuracy(const AnswerDistribution &p);
/// 1 - p_mode.
[[nodiscard]] double variation_ratio(const AnswerDistribution &p);
[[nodiscard]] double tv_distance(const AnswerDistribution &p, const AnswerDistribution &q);

struct WeightedValue {
    double weight = 0.0;
    double value = 0.0;
};

[[nodiscard]] double mean_accuracy(const std::vector<WeightedValue> &per_subgroup, MeanMode mode);
/// Fraction (or weight fraction) of entries strictly below `threshold`.
[[nodiscard]] double vr_tail_fraction(const std::vector<WeightedValue> &vrs, double threshold, MeanMode mode);

struct SubgroupMetrics {
    SubgroupKey key;
    std::string question_id;
    double support_weight = 0.0;
    double accuracy = 0.0;
    double self_similarity = 0.0;
    double mode_accuracy = 0.0;
    int mode_option = 1;
    double variation_ratio_truth = 0.0;
    double variation_ratio_model = 0.0;
    double tv_vs_truth = 0.0;
};

[[nodiscard]] SubgroupMetrics subgroup_metrics(const SubgroupKey &key, const AnswerDistribution &truth,
                                               const AnswerDistribution &model);

[[nodiscard]] std::string to_string(MeanMode mode);

} // namespace silicon::metrics
