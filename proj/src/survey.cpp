#include "silicon/survey.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

namespace silicon {

namespace {

constexpr double kSumTolerance = 1e-9;

} // namespace

std::optional<std::size_t> Attribute::level_index(const std::string &level_id) const {
    for (std::size_t i = 0; i < levels.size(); ++i) {
        if (levels[i].id == level_id) return i;
    }
    return std::nullopt;
}

DemographicSchema::DemographicSchema(std::vector<Attribute> attributes,
                                     std::vector<std::pair<std::string, std::string>> excluded)
    : attributes_(std::move(attributes)), excluded_(std::move(excluded)) {
    std::set<std::string> ids;
    for (const auto &attr : attributes_) {
        if (attr.id.empty()) throw SurveyError("attribute with empty id");
        if (!ids.insert(attr.id).second) throw SurveyError("duplicate attribute id '" + attr.id + "'");
        if (attr.levels.empty()) throw SurveyError("attribute '" + attr.id + "' has no levels");
        std::set<std::string> level_ids;
        for (const auto &level : attr.levels) {
            if (level.id.empty()) throw SurveyError("attribute '" + attr.id + "' has a level with empty id");
            if (!level_ids.insert(level.id).second) {
                throw SurveyError("duplicate level id '" + level.id + "' in attribute '" + attr.id + "'");
            }
        }
    }
    for (const auto &[attr, level] : excluded_) {
        auto idx = attribute_index(attr);
        if (!idx) throw SurveyError("exclusion names unknown attribute '" + attr + "'");
        if (!attributes_[*idx].level_index(level)) {
            throw SurveyError("exclusion names unknown level '" + level + "' of '" + attr + "'");
        }
    }
}

std::optional<std::size_t> DemographicSchema::attribute_index(const std::string &id) const {
    for (std::size_t i = 0; i < attributes_.size(); ++i) {
        if (attributes_[i].id == id) return i;
    }
    return std::nullopt;
}

bool DemographicSchema::is_excluded(const std::string &attribute, const std::string &level) const {
    return std::find(excluded_.begin(), excluded_.end(), std::pair{attribute, level}) != excluded_.end();
}

void QuestionSpec::validate() const {
    if (id.empty()) throw SurveyError("question with empty id");
    if (options.size() < 2) throw SurveyError("question '" + id + "' needs at least 2 options");
    for (std::size_t i = 0; i < options.size(); ++i) {
        if (options[i].index != static_cast<int>(i + 1)) {
            throw SurveyError("question '" + id + "' options must be indexed 1..K in order");
        }
    }
}

// ---------------------------------------------------------------------------
// SubgroupKey

SubgroupKey SubgroupKey::parse(const std::string &text) {
    if (text.empty() || text == "*") return {};
    std::vector<std::pair<std::string, std::string>> out;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, '|')) {
        auto eq = part.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == part.size()) {
            throw SurveyError("malformed subgroup key '" + text + "'");
        }
        out.emplace_back(part.substr(0, eq), part.substr(eq + 1));
    }
    return SubgroupKey(std::move(out));
}

const std::string *SubgroupKey::level_of(const std::string &attribute) const {
    for (const auto &[a, l] : assignments_) {
        if (a == attribute) return &l;
    }
    return nullptr;
}

bool SubgroupKey::refines(const SubgroupKey &coarser) const {
    if (coarser.granularity() > granularity()) return false;
    return std::equal(coarser.assignments_.begin(), coarser.assignments_.end(), assignments_.begin());
}

SubgroupKey SubgroupKey::truncated(std::size_t g) const {
    g = std::min(g, assignments_.size());
    return SubgroupKey({assignments_.begin(), assignments_.begin() + static_cast<std::ptrdiff_t>(g)});
}

void SubgroupKey::validate(const DemographicSchema &schema) const {
    if (assignments_.size() > schema.size()) {
        throw SurveyError("subgroup key '" + to_string() + "' assigns more attributes than the schema has");
    }
    for (std::size_t i = 0; i < assignments_.size(); ++i) {
        const auto &[attr, level] = assignments_[i];
        const auto &expected = schema.at(i);
        if (attr != expected.id) {
            throw SurveyError("subgroup key '" + to_string() + "' is not a schema-order prefix (expected '" +
                              expected.id + "' at position " + std::to_string(i + 1) + ")");
        }
        if (!expected.level_index(level) || schema.is_excluded(attr, level)) {
            throw SurveyError("subgroup key '" + to_string() + "' uses undeclared level '" + level + "'");
        }
    }
}

std::string SubgroupKey::to_string() const {
    if (assignments_.empty()) return "*";
    std::string out;
    for (const auto &[a, l] : assignments_) {
        if (!out.empty()) out += '|';
        out += a;
        out += '=';
        out += l;
    }
    return out;
}

// ---------------------------------------------------------------------------
// AnswerDistribution

AnswerDistribution::AnswerDistribution(std::string question_id, std::vector<double> probs, double support_weight)
    : question_id_(std::move(question_id)), probs_(std::move(probs)), support_weight_(support_weight) {
    if (probs_.empty()) throw SurveyError("empty answer distribution");
    if (!(support_weight_ >= 0.0) || !std::isfinite(support_weight_)) {
        throw SurveyError("support weight must be finite and non-negative");
    }
    double sum = 0.0;
    for (double p : probs_) {
        if (!(p >= 0.0 && p <= 1.0)) throw SurveyError("probability outside [0,1] in distribution");
        sum += p;
    }
    if (std::abs(sum - 1.0) > kSumTolerance) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "distribution for '" << question_id_ << "' sums to " << sum;
        throw SurveyError(msg.str());
    }
}

AnswerDistribution AnswerDistribution::from_masses(std::string question_id, const std::vector<double> &masses,
                                                   double support_weight) {
    double total = 0.0;
    for (double m : masses) {
        if (!(m >= 0.0) || !std::isfinite(m)) throw SurveyError("negative or non-finite mass");
        total += m;
    }
    if (!(total > 0.0)) throw SurveyError("zero total mass");
    std::vector<double> probs(masses.size());
    for (std::size_t j = 0; j < masses.size(); ++j) probs[j] = masses[j] / total;
    return {std::move(question_id), std::move(probs), support_weight};
}

AnswerDistribution AnswerDistribution::delta(std::string question_id, std::size_t k, int option,
                                             double support_weight) {
    if (option < 1 || static_cast<std::size_t>(option) > k) throw SurveyError("delta option out of range");
    std::vector<double> probs(k, 0.0);
    probs[static_cast<std::size_t>(option - 1)] = 1.0;
    return {std::move(question_id), std::move(probs), support_weight};
}

AnswerDistribution AnswerDistribution::uniform(std::string question_id, std::size_t k, double support_weight) {
    return {std::move(question_id), std::vector<double>(k, 1.0 / static_cast<double>(k)), support_weight};
}

// ---------------------------------------------------------------------------
// SurveyDataset

WeightMode parse_weight_mode(const std::string &text) {
    if (text == "column") return WeightMode::column;
    if (text == "unit") return WeightMode::unit;
    throw SurveyError("unknown weight mode '" + text + "' (expected column|unit)");
}

std::string to_string(WeightMode mode) { return mode == WeightMode::unit ? "unit" : "column"; }

SurveyDataset::SurveyDataset(DemographicSchema schema, std::vector<QuestionSpec> questions,
                             std::vector<Respondent> respondents, WeightMode weight_mode)
    : schema_(std::move(schema)), questions_(std::move(questions)), respondents_(std::move(respondents)),
      weight_mode_(weight_mode) {
    std::set<std::string> qids;
    for (const auto &q : questions_) {
        q.validate();
        if (!qids.insert(q.id).second) throw SurveyError("duplicate question id '" + q.id + "'");
        if (schema_.attribute_index(q.id)) {
            throw SurveyError("question id '" + q.id + "' collides with an attribute id");
        }
    }
    std::set<std::string> rids;
    for (const auto &r : respondents_) {
        if (!rids.insert(r.id).second) throw SurveyError("duplicate respondent id '" + r.id + "'");
        if (!(r.weight >= 0.0) || !std::isfinite(r.weight)) {
            throw SurveyError("negative weight for respondent '" + r.id + "'");
        }
        if (r.levels.size() != schema_.size()) {
            throw SurveyError("respondent '" + r.id + "' does not assign every attribute");
        }
        for (std::size_t a = 0; a < r.levels.size(); ++a) {
            if (r.levels[a] >= schema_.at(a).levels.size()) {
                throw SurveyError("respondent '" + r.id + "' has an undeclared level");
            }
        }
        if (r.answers.size() != questions_.size()) {
            throw SurveyError("respondent '" + r.id + "' answer count mismatch");
        }
        for (std::size_t q = 0; q < r.answers.size(); ++q) {
            const auto &ans = r.answers[q];
            if (ans && (*ans < 1 || static_cast<std::size_t>(*ans) > questions_[q].option_count())) {
                throw SurveyError("respondent '" + r.id + "' answer out of range for '" + questions_[q].id + "'");
            }
        }
    }
    if (respondents_.empty()) warnings.emplace_back("dataset has no respondents");
}

const QuestionSpec &SurveyDataset::question(const std::string &id) const {
    return questions_[question_index(id)];
}

std::size_t SurveyDataset::question_index(const std::string &id) const {
    for (std::size_t i = 0; i < questions_.size(); ++i) {
        if (questions_[i].id == id) return i;
    }
    throw SurveyError("unknown question '" + id + "'");
}

SurveyDataset SurveyDataset::with_weight_mode(WeightMode mode) const {
    SurveyDataset copy = *this;
    copy.weight_mode_ = mode;
    return copy;
}

SubgroupKey SurveyDataset::key_of(const Respondent &r, std::size_t granularity) const {
    std::vector<std::pair<std::string, std::string>> out;
    out.reserve(granularity);
    for (std::size_t a = 0; a < granularity; ++a) {
        const auto &attr = schema_.at(a);
        out.emplace_back(attr.id, attr.levels[r.levels[a]].id);
    }
    return SubgroupKey(std::move(out));
}

bool SurveyDataset::matches(const Respondent &r, const SubgroupKey &key) const {
    const auto &assign = key.assignments();
    for (std::size_t a = 0; a < assign.size(); ++a) {
        if (schema_.at(a).levels[r.levels[a]].id != assign[a].second) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// Operations

AnswerDistribution empirical_distribution(const SurveyDataset &dataset, const std::string &question_id,
                                          const SubgroupKey &key) {
    const std::size_t qi = dataset.question_index(question_id);
    key.validate(dataset.schema());
    const std::size_t k = dataset.questions()[qi].option_count();
    std::vector<double> mass(k, 0.0);
    double total = 0.0;
    for (const auto &r : dataset.respondents()) {
        const auto &ans = r.answers[qi];
        if (!ans || !dataset.matches(r, key)) continue;
        const double w = dataset.weight(r);
        mass[static_cast<std::size_t>(*ans - 1)] += w;
        total += w;
    }
    if (!(total > 0.0)) {
        throw EmptySubgroupError("empty subgroup " + key.to_string() + " for question '" + question_id + "'");
    }
    std::vector<double> probs(k);
    for (std::size_t j = 0; j < k; ++j) probs[j] = mass[j] / total;
    return {question_id, std::move(probs), total};
}

std::vector<SubgroupWeight> enumerate_subgroups(const SurveyDataset &dataset, std::size_t granularity,
                                                const std::string &question_id) {
    if (granularity > dataset.schema().size()) {
        throw SurveyError("granularity " + std::to_string(granularity) + " out of range 0.." +
                          std::to_string(dataset.schema().size()));
    }
    const std::size_t qi = dataset.question_index(question_id);
    // Level-index tuples order subgroups by schema level order.
    std::map<std::vector<std::size_t>, double> cells;
    for (const auto &r : dataset.respondents()) {
        if (!r.answers[qi]) continue;
        std::vector<std::size_t> prefix(r.levels.begin(), r.levels.begin() + static_cast<std::ptrdiff_t>(granularity));
        cells[prefix] += dataset.weight(r);
    }
    std::vector<SubgroupWeight> out;
    out.reserve(cells.size());
    for (const auto &[prefix, w] : cells) {
        if (!(w > 0.0)) continue;
        std::vector<std::pair<std::string, std::string>> assign;
        for (std::size_t a = 0; a < prefix.size(); ++a) {
            const auto &attr = dataset.schema().at(a);
            assign.emplace_back(attr.id, attr.levels[prefix[a]].id);
        }
        out.push_back({SubgroupKey(std::move(assign)), w});
    }
    return out;
}

AnswerDistribution aggregate(const std::vector<WeightedPart> &parts, const SubgroupKey &target) {
    if (parts.empty()) throw SurveyError("aggregate over no parts for " + target.to_string());
    const auto &qid = parts.front().distribution.question_id();
    const std::size_t k = parts.front().distribution.size();
    std::vector<double> acc(k, 0.0);
    double total = 0.0;
    for (const auto &part : parts) {
        if (!part.key.refines(target)) {
            throw SurveyError("part " + part.key.to_string() + " does not refine " + target.to_string());
        }
        if (part.distribution.question_id() != qid || part.distribution.size() != k) {
            throw SurveyError("aggregate parts disagree on question or option count");
        }
        if (!(part.weight >= 0.0) || !std::isfinite(part.weight)) {
            throw SurveyError("aggregate part weight must be finite and non-negative");
        }
        for (std::size_t j = 0; j < k; ++j) acc[j] += part.weight * part.distribution[j];
        total += part.weight;
    }
    if (!(total > 0.0)) throw SurveyError("aggregate with zero total weight for " + target.to_string());
    for (auto &v : acc) v = std::min(1.0, v / total);
    return {qid, std::move(acc), total};
}

} // namespace silicon
