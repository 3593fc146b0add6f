#pragma once

#include "silicon/probes.hpp"
#include "silicon/survey.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace silicon::probes {

enum class MockKind { empirical_oracle, mode, sharpened, uniform, fixed };

/// Deterministic offline model. Dataset-backed kinds answer from the
/// subgroup's weighted survey distribution:
///   empirical_oracle  p itself
///   mode              delta on p's mode (lowest index on ties)
///   sharpened(g)      p_j^g / sum_m p_m^g, g >= 1
///   uniform           1/K everywhere
///   fixed             a lookup table question -> key -> probs
struct MockModel {
    MockKind kind = MockKind::empirical_oracle;
    double gamma = 1.0;
    std::map<std::string, std::map<std::string, std::vector<double>>> table;

    /// "empirical-oracle", "mode", "sharpened:3", "uniform" or "fixed:<table.json>".
    static MockModel parse(const std::string &spec);
    /// Stable identifier, e.g. "mock:sharpened:3".
    [[nodiscard]] std::string id() const;
};

/// p^gamma renormalized, computed in log space so large gamma stays finite.
[[nodiscard]] AnswerDistribution sharpen(const AnswerDistribution &p, double gamma);

/// Throws EmptySubgroupError for dataset-backed kinds on empty subgroups.
[[nodiscard]] ProbeRecord mock_probe(const MockModel &mock, const SubgroupKey &key, const std::string &question_id,
                                     const SurveyDataset &dataset);

} // namespace silicon::probes
