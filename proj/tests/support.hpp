#pragma once

#include "silicon/survey.hpp"

#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

namespace testing {

inline std::filesystem::path data(const std::string &rel) { return std::filesystem::path(SILICON_DATA_DIR) / rel; }

inline std::filesystem::path fresh_dir(const std::string &name) {
    auto dir = std::filesystem::temp_directory_path() / ("silicon-" + name + "-" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::string slurp(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void spit(const std::filesystem::path &path, const std::string &text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
}

inline silicon::Attribute attribute(const std::string &id, const std::vector<std::string> &levels) {
    silicon::Attribute a{.id = id, .label = id, .source_variable = "", .levels = {}};
    for (const auto &l : levels) a.levels.push_back({l, l, ""});
    return a;
}

inline silicon::QuestionSpec question(const std::string &id, int k) {
    silicon::QuestionSpec q{.id = id, .source_variable = "", .text = id + "?", .options = {}};
    for (int i = 1; i <= k; ++i) q.options.push_back({i, "option " + std::to_string(i), ""});
    return q;
}

struct Row {
    std::string sex;
    std::string race;
    double weight;
    std::optional<int> answer;
};

/// sex {M,F} x race {A,B}, one K=2 question "q".
inline silicon::SurveyDataset sex_race_dataset(const std::vector<Row> &rows) {
    silicon::DemographicSchema schema({attribute("sex", {"M", "F"}), attribute("race", {"A", "B"})});
    std::vector<silicon::Respondent> people;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto &r = rows[i];
        people.push_back({"r" + std::to_string(i), r.weight,
                          {r.sex == "M" ? 0u : 1u, r.race == "A" ? 0u : 1u},
                          {r.answer}});
    }
    return silicon::SurveyDataset(std::move(schema), {question("q", 2)}, std::move(people));
}

/// Males of race A (weight 6) mostly answer 1; males of race B (weight 4)
/// mostly answer 2; males overall lean to 1.
inline silicon::SurveyDataset race_varying_males() {
    return sex_race_dataset({
        {"M", "A", 5.0, 1},
        {"M", "A", 1.0, 2},
        {"M", "B", 1.5, 1},
        {"M", "B", 2.5, 2},
        {"F", "A", 2.0, 2},
        {"F", "B", 3.0, 1},
    });
}

inline std::vector<double> random_simplex(std::mt19937_64 &rng, std::size_t k) {
    std::exponential_distribution<double> e(1.0);
    std::vector<double> v(k);
    double s = 0.0;
    for (auto &x : v) s += (x = e(rng));
    for (auto &x : v) x /= s;
    return v;
}

} // namespace testing
