#include "silicon/metrics.hpp"

#include <cmath>

namespace silicon::metrics {

namespace {

void require_same_shape(const AnswerDistribution &p, const AnswerDistribution &q) {
    if (p.size() != q.size()) {
        throw SurveyError("dimension mismatch: " + std::to_string(p.size()) + " vs " + std::to_string(q.size()));
    }
}

} // namespace

double accuracy(const AnswerDistribution &p, const AnswerDistribution &q) {
    require_same_shape(p, q);
    double u = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) u += p[j] * q[j];
    return u;
}

double self_similarity(const AnswerDistribution &p) { return accuracy(p, p); }

ModeResult mode_accuracy(const AnswerDistribution &p) {
    ModeResult best{p[0], 1};
    for (std::size_t j = 1; j < p.size(); ++j) {
        if (p[j] > best.value) best = {p[j], static_cast<int>(j + 1)};
    }
    return best;
}

double variation_ratio(const AnswerDistribution &p) { return 1.0 - mode_accuracy(p).value; }

double tv_distance(const AnswerDistribution &p, const AnswerDistribution &q) {
    require_same_shape(p, q);
    double d = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) d += std::abs(p[j] - q[j]);
    return 0.5 * d;
}

double mean_accuracy(const std::vector<WeightedValue> &per_subgroup, MeanMode mode) {
    if (per_subgroup.empty()) throw SurveyError("mean of an empty list");
    double num = 0.0;
    double den = 0.0;
    for (const auto &[w, u] : per_subgroup) {
        const double weight = mode == MeanMode::weighted ? w : 1.0;
        num += weight * u;
        den += weight;
    }
    if (!(den > 0.0)) throw SurveyError("weighted mean with zero total weight");
    return num / den;
}

double vr_tail_fraction(const std::vector<WeightedValue> &vrs, double threshold, MeanMode mode) {
    if (vrs.empty()) throw SurveyError("tail fraction of an empty list");
    if (!(threshold > 0.0 && threshold < 1.0)) throw SurveyError("threshold must lie in (0,1)");
    double below = 0.0;
    double total = 0.0;
    for (const auto &[w, vr] : vrs) {
        const double weight = mode == MeanMode::weighted ? w : 1.0;
        if (vr < threshold) below += weight;
        total += weight;
    }
    if (!(total > 0.0)) throw SurveyError("tail fraction with zero total weight");
    return below / total;
}

SubgroupMetrics subgroup_metrics(const SubgroupKey &key, const AnswerDistribution &truth,
                                 const AnswerDistribution &model) {
    const auto mode = mode_accuracy(truth);
    return SubgroupMetrics{
        .key = key,
        .question_id = truth.question_id(),
        .support_weight = truth.support_weight(),
        .accuracy = accuracy(truth, model),
        .self_similarity = self_similarity(truth),
        .mode_accuracy = mode.value,
        .mode_option = mode.option,
        .variation_ratio_truth = 1.0 - mode.value,
        .variation_ratio_model = variation_ratio(model),
        .tv_vs_truth = tv_distance(truth, model),
    };
}

std::string to_string(MeanMode mode) { return mode == MeanMode::weighted ? "weighted" : "unweighted"; }

} // namespace silicon::metrics
