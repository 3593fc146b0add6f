#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace silicon {

/// Raised for any violated precondition on survey data or distributions.
class SurveyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// No matching respondent has a non-missing answer.
class EmptySubgroupError : public SurveyError {
public:
    using SurveyError::SurveyError;
};

struct Level {
    std::string id;
    std::string label;
    /// Phrase inserted into persona prompts; empty means use `label`.
    std::string prompt_label;

    [[nodiscard]] const std::string &prompt_text() const {
        return prompt_label.empty() ? label : prompt_label;
    }
};

struct Attribute {
    std::string id;
    std::string label;
    std::string source_variable;
    std::vector<Level> levels;

    /// Index of `level_id` in `levels`, or nullopt.
    [[nodiscard]] std::optional<std::size_t> level_index(const std::string &level_id) const;
};

/// Ordered demographic attributes. Attribute order defines granularity:
/// a level-g subgroup fixes the first g attributes.
class DemographicSchema {
public:
    DemographicSchema() = default;
    explicit DemographicSchema(std::vector<Attribute> attributes,
                               std::vector<std::pair<std::string, std::string>> excluded = {});

    [[nodiscard]] const std::vector<Attribute> &attributes() const { return attributes_; }
    [[nodiscard]] std::size_t size() const { return attributes_.size(); }
    [[nodiscard]] const Attribute &at(std::size_t i) const { return attributes_.at(i); }
    [[nodiscard]] std::optional<std::size_t> attribute_index(const std::string &id) const;

    /// (attribute id, level id) pairs removed at load; respondents carrying
    /// them are dropped from the dataset.
    [[nodiscard]] const std::vector<std::pair<std::string, std::string>> &excluded() const {
        return excluded_;
    }
    [[nodiscard]] bool is_excluded(const std::string &attribute, const std::string &level) const;

private:
    std::vector<Attribute> attributes_;
    std::vector<std::pair<std::string, std::string>> excluded_;
};

struct AnswerOption {
    int index = 0;
    std::string text;
    /// Wording used in prompts when it differs from the codebook text.
    std::string prompt_text;

    [[nodiscard]] const std::string &prompt_wording() const {
        return prompt_text.empty() ? text : prompt_text;
    }
};

struct QuestionSpec {
    std::string id;
    std::string source_variable;
    std::string text;
    std::vector<AnswerOption> options;

    [[nodiscard]] std::size_t option_count() const { return options.size(); }
    /// Throws SurveyError unless options are indexed 1..K with K >= 2.
    void validate() const;
};

struct Respondent {
    std::string id;
    double weight = 1.0;
    /// Level index per schema attribute, in schema order.
    std::vector<std::size_t> levels;
    /// Option index (1..K) per question, in dataset question order.
    std::vector<std::optional<int>> answers;
};

/// Partial assignment of demographic levels over a prefix of the schema.
/// Stored as (attribute id, level id) pairs in schema order.
class SubgroupKey {
public:
    SubgroupKey() = default;
    explicit SubgroupKey(std::vector<std::pair<std::string, std::string>> assignments)
        : assignments_(std::move(assignments)) {}

    static SubgroupKey population() { return {}; }
    /// Parses "sex=S1|race=R2"; "*" or "" is the population key.
    static SubgroupKey parse(const std::string &text);

    [[nodiscard]] std::size_t granularity() const { return assignments_.size(); }
    [[nodiscard]] const std::vector<std::pair<std::string, std::string>> &assignments() const {
        return assignments_;
    }
    [[nodiscard]] const std::string *level_of(const std::string &attribute) const;

    /// True if this key assigns everything `coarser` assigns (same values).
    [[nodiscard]] bool refines(const SubgroupKey &coarser) const;
    /// Prefix of this key with `g` assignments.
    [[nodiscard]] SubgroupKey truncated(std::size_t g) const;
    /// Throws SurveyError unless assignments follow the schema prefix and
    /// name declared, non-excluded levels.
    void validate(const DemographicSchema &schema) const;

    [[nodiscard]] std::string to_string() const;

    friend bool operator==(const SubgroupKey &, const SubgroupKey &) = default;
    friend auto operator<=>(const SubgroupKey &, const SubgroupKey &) = default;

private:
    std::vector<std::pair<std::string, std::string>> assignments_;
};

/// Probability vector over a question's options (index 0 is option 1).
class AnswerDistribution {
public:
    AnswerDistribution() = default;
    /// Validates: non-empty, entries in [0,1], sum within 1e-9 of 1.
    AnswerDistribution(std::string question_id, std::vector<double> probs, double support_weight = 1.0);

    /// Normalizes non-negative masses; throws on zero or negative input.
    static AnswerDistribution from_masses(std::string question_id, const std::vector<double> &masses,
                                          double support_weight);
    static AnswerDistribution delta(std::string question_id, std::size_t k, int option,
                                    double support_weight = 1.0);
    static AnswerDistribution uniform(std::string question_id, std::size_t k, double support_weight = 1.0);

    [[nodiscard]] const std::string &question_id() const { return question_id_; }
    [[nodiscard]] const std::vector<double> &probs() const { return probs_; }
    [[nodiscard]] std::size_t size() const { return probs_.size(); }
    [[nodiscard]] double operator[](std::size_t i) const { return probs_[i]; }
    [[nodiscard]] double support_weight() const { return support_weight_; }

private:
    std::string question_id_;
    std::vector<double> probs_;
    double support_weight_ = 0.0;
};

enum class WeightMode { column, unit };

[[nodiscard]] WeightMode parse_weight_mode(const std::string &text);
[[nodiscard]] std::string to_string(WeightMode mode);

class SurveyDataset {
public:
    SurveyDataset() = default;
    /// Validates every respondent against schema and questions; rejects
    /// duplicate respondent ids.
    SurveyDataset(DemographicSchema schema, std::vector<QuestionSpec> questions,
                  std::vector<Respondent> respondents, WeightMode weight_mode = WeightMode::column);

    [[nodiscard]] const DemographicSchema &schema() const { return schema_; }
    [[nodiscard]] const std::vector<QuestionSpec> &questions() const { return questions_; }
    [[nodiscard]] const std::vector<Respondent> &respondents() const { return respondents_; }
    [[nodiscard]] WeightMode weight_mode() const { return weight_mode_; }
    [[nodiscard]] bool empty() const { return respondents_.empty(); }

    [[nodiscard]] const QuestionSpec &question(const std::string &id) const;
    [[nodiscard]] std::size_t question_index(const std::string &id) const;

    /// Weight used in all computations under the dataset's weight mode.
    [[nodiscard]] double weight(const Respondent &r) const {
        return weight_mode_ == WeightMode::unit ? 1.0 : r.weight;
    }
    [[nodiscard]] SurveyDataset with_weight_mode(WeightMode mode) const;

    /// Load-time notes (empty respondent section, dropped excluded rows).
    std::vector<std::string> warnings;

    /// Key of the level-g subgroup a respondent belongs to.
    [[nodiscard]] SubgroupKey key_of(const Respondent &r, std::size_t granularity) const;
    [[nodiscard]] bool matches(const Respondent &r, const SubgroupKey &key) const;

private:
    DemographicSchema schema_;
    std::vector<QuestionSpec> questions_;
    std::vector<Respondent> respondents_;
    WeightMode weight_mode_ = WeightMode::column;
};

struct LoadOptions {
    WeightMode weight_mode = WeightMode::column;
    std::string weight_column = "weight";
    std::string id_column = "id";
    char delimiter = ',';
};

/// Reads the schema document (JSON). See README for field names.
[[nodiscard]] DemographicSchema load_schema(const std::filesystem::path &path);
/// Reads the questions document (JSON).
[[nodiscard]] std::vector<QuestionSpec> load_questions(const std::filesystem::path &path);
/// Reads the delimited respondent file and validates it against schema and questions.
[[nodiscard]] SurveyDataset load_survey(const std::filesystem::path &survey_csv,
                                        const std::filesystem::path &schema_doc,
                                        const std::filesystem::path &questions_doc,
                                        const LoadOptions &options = {});
[[nodiscard]] SurveyDataset parse_survey(const std::string &survey_text, DemographicSchema schema,
                                         std::vector<QuestionSpec> questions,
                                         const LoadOptions &options = {});

/// Weighted share of each option among matching respondents with a
/// non-missing answer. Throws EmptySubgroupError when there are none.
[[nodiscard]] AnswerDistribution empirical_distribution(const SurveyDataset &dataset,
                                                        const std::string &question_id,
                                                        const SubgroupKey &key);

struct SubgroupWeight {
    SubgroupKey key;
    double support_weight = 0.0;
};

/// Populated level-g subgroups for a question in schema level order, each
/// with the total weight of its respondents who answered.
[[nodiscard]] std::vector<SubgroupWeight> enumerate_subgroups(const SurveyDataset &dataset,
                                                              std::size_t granularity,
                                                              const std::string &question_id);

struct WeightedPart {
    SubgroupKey key;
    double weight = 0.0;
    AnswerDistribution distribution;
};

/// Support-weighted mixture of distributions of subgroups refining `target`.
[[nodiscard]] AnswerDistribution aggregate(const std::vector<WeightedPart> &parts,
                                           const SubgroupKey &target);

} // namespace silicon
