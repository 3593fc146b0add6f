#include "silicon/consistency.hpp"

#include "silicon/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace silicon::consistency {

namespace {

constexpr double kBoundSlack = 1e-12;

/// Uniform point on the simplex: normalized unit exponentials.
std::vector<double> sample_simplex(std::size_t k, std::mt19937_64 &rng) {
    std::exponential_distribution<double> expo(1.0);
    std::vector<double> x(k);
    double total = 0.0;
    for (auto &v : x) {
        v = expo(rng);
        total += v;
    }
    for (auto &v : x) v /= total;
    return x;
}

} // namespace

double expected_match(const AnswerDistribution &p, const AnswerDistribution &q) { return metrics::accuracy(p, q); }

OptimalityReport verify_mode_optimality(const AnswerDistribution &p, std::size_t trials, std::uint64_t seed) {
    if (trials < 1) throw SurveyError("verify_mode_optimality needs trials >= 1");
    const auto mode = metrics::mode_accuracy(p);
    const std::size_t k = p.size();
    OptimalityReport report;
    report.mode_value = mode.value;
    report.mode_option = mode.option;
    report.max_observed = -1.0;

    auto check = [&](const AnswerDistribution &q) {
        const double u = expected_match(p, q);
        ++report.strategies_checked;
        if (u > report.max_observed) {
            report.max_observed = u;
            report.argmax_strategy = q.probs();
        }
        if (u > mode.value + kBoundSlack) {
            report.bound_holds = false;
            std::ostringstream msg;
            msg.precision(17);
            msg << "strategy " << report.strategies_checked << " scores " << u << " > mode " << mode.value;
            report.failures.push_back(msg.str());
        }
    };

    for (std::size_t j = 1; j <= k; ++j) check(AnswerDistribution::delta(p.question_id(), k, static_cast<int>(j)));
    std::mt19937_64 rng(seed);
    for (std::size_t t = 0; t < trials; ++t) check(AnswerDistribution(p.question_id(), sample_simplex(k, rng)));

    const double at_mode = expected_match(p, AnswerDistribution::delta(p.question_id(), k, mode.option));
    if (at_mode < report.max_observed - kBoundSlack) {
        report.mode_attains_max = false;
        report.failures.push_back("mode vertex does not attain the observed maximum");
    }
    return report;
}

double simulate_match_rate(const AnswerDistribution &p, const AnswerDistribution &q, std::size_t n,
                           std::uint64_t seed) {
    if (n < 1) throw SurveyError("simulate_match_rate needs n >= 1");
    if (p.size() != q.size()) throw SurveyError("dimension mismatch");
    std::mt19937_64 rng(seed);
    std::discrete_distribution<std::size_t> belief(p.probs().begin(), p.probs().end());
    std::discrete_distribution<std::size_t> answer(q.probs().begin(), q.probs().end());
    std::size_t matches = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto b = belief(rng);
        if (b == answer(rng)) ++matches;
    }
    return static_cast<double>(matches) / static_cast<double>(n);
}

TheoremSuiteResult run_theorem_suite(std::size_t distributions, std::size_t trials, std::uint64_t seed) {
    TheoremSuiteResult result;
    result.max_excess = -1.0;
    std::mt19937_64 rng(seed);
    for (std::size_t d = 0; d < distributions; ++d) {
        const std::size_t k = 2 + d % 5;
        const AnswerDistribution p("theorem", sample_simplex(k, rng));
        const auto report = verify_mode_optimality(p, trials, rng());
        ++result.distributions;
        result.strategies += report.strategies_checked;
        if (!report.passed()) ++result.failures;
        result.max_excess = std::max(result.max_excess, report.max_observed - report.mode_value);
    }
    return result;
}

bool ConvergencePoint::within(double sigmas) const {
    return std::abs(estimate - expected) <= sigmas * sigma;
}

std::vector<ConvergencePoint> match_rate_convergence(const AnswerDistribution &p, const AnswerDistribution &q,
                                                     std::span<const std::size_t> sample_sizes, std::uint64_t seed) {
    const double u = expected_match(p, q);
    std::vector<ConvergencePoint> out;
    for (std::size_t i = 0; i < sample_sizes.size(); ++i) {
        const std::size_t n = sample_sizes[i];
        out.push_back({n, simulate_match_rate(p, q, n, seed + i), u,
                       std::sqrt(u * (1.0 - u) / static_cast<double>(n))});
    }
    return out;
}

} // namespace silicon::consistency
