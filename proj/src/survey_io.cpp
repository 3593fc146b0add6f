#include "silicon/survey.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace silicon {

namespace {

using nlohmann::json;

std::string read_file(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SurveyError("file not found: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json parse_json_file(const std::filesystem::path &path) {
    const auto text = read_file(path);
    try {
        return json::parse(text);
    } catch (const json::parse_error &e) {
        throw SurveyError("cannot parse " + path.string() + ": " + e.what());
    }
}

std::string string_field(const json &obj, const char *name, bool required = true) {
    auto it = obj.find(name);
    if (it == obj.end()) {
        if (required) throw SurveyError(std::string("missing field '") + name + "'");
        return {};
    }
    if (!it->is_string()) throw SurveyError(std::string("field '") + name + "' must be a string");
    return it->get<std::string>();
}

/// Splits one delimited record; supports double-quoted cells with "" escapes.
std::vector<std::string> split_record(const std::string &line, char delim) {
    std::vector<std::string> cells;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"' && cur.empty()) {
            quoted = true;
        } else if (c == delim) {
            cells.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (quoted) throw SurveyError("unterminated quoted cell");
    cells.push_back(std::move(cur));
    return cells;
}

std::string trim(const std::string &s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void row_error(std::size_t row, const std::string &what) {
    throw SurveyError(what + " at row " + std::to_string(row));
}

} // namespace

DemographicSchema load_schema(const std::filesystem::path &path) {
    const json doc = parse_json_file(path);
    if (!doc.contains("attributes") || !doc["attributes"].is_array()) {
        throw SurveyError(path.string() + ": schema needs an 'attributes' array");
    }
    std::vector<Attribute> attributes;
    std::vector<std::pair<std::string, std::string>> excluded;
    for (const auto &a : doc["attributes"]) {
        Attribute attr;
        attr.id = string_field(a, "id");
        attr.label = string_field(a, "label", false);
        attr.source_variable = string_field(a, "source_variable", false);
        if (!a.contains("levels") || !a["levels"].is_array()) {
            throw SurveyError("attribute '" + attr.id + "' needs a 'levels' array");
        }
        for (const auto &l : a["levels"]) {
            Level level;
            level.id = string_field(l, "id");
            level.label = string_field(l, "label", false);
            if (level.label.empty()) level.label = level.id;
            level.prompt_label = string_field(l, "prompt_label", false);
            attr.levels.push_back(std::move(level));
        }
        if (a.contains("exclude")) {
            for (const auto &ex : a["exclude"]) excluded.emplace_back(attr.id, ex.get<std::string>());
        }
        attributes.push_back(std::move(attr));
    }
    return DemographicSchema(std::move(attributes), std::move(excluded));
}

std::vector<QuestionSpec> load_questions(const std::filesystem::path &path) {
    const json doc = parse_json_file(path);
    if (!doc.contains("questions") || !doc["questions"].is_array()) {
        throw SurveyError(path.string() + ": needs a 'questions' array");
    }
    std::vector<QuestionSpec> out;
    for (const auto &q : doc["questions"]) {
        QuestionSpec spec;
        spec.id = string_field(q, "id");
        spec.source_variable = string_field(q, "source_variable", false);
        spec.text = string_field(q, "text");
        if (!q.contains("options") || !q["options"].is_array()) {
            throw SurveyError("question '" + spec.id + "' needs an 'options' array");
        }
        for (const auto &o : q["options"]) {
            AnswerOption opt;
            if (!o.contains("index") || !o["index"].is_number_integer()) {
                throw SurveyError("question '" + spec.id + "' option missing integer 'index'");
            }
            opt.index = o["index"].get<int>();
            opt.text = string_field(o, "text");
            opt.prompt_text = string_field(o, "prompt_text", false);
            spec.options.push_back(std::move(opt));
        }
        spec.validate();
        out.push_back(std::move(spec));
    }
    return out;
}

SurveyDataset parse_survey(const std::string &survey_text, DemographicSchema schema,
                           std::vector<QuestionSpec> questions, const LoadOptions &options) {
    std::istringstream in(survey_text);
    std::string line;
    std::size_t row = 0;

    // Header
    while (std::getline(in, line)) {
        ++row;
        if (!trim(line).empty()) break;
    }
    if (row == 0 || trim(line).empty()) throw SurveyError("survey file has no header row");
    if (row == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    const auto header = split_record(line, options.delimiter);
    std::map<std::string, std::size_t> column;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (!column.emplace(trim(header[i]), i).second) row_error(row, "duplicate column '" + header[i] + "'");
    }
    auto require_column = [&](const std::string &name) {
        auto it = column.find(name);
        if (it == column.end()) throw SurveyError("survey file lacks column '" + name + "'");
        return it->second;
    };
    const std::size_t id_col = require_column(options.id_column);
    const bool has_weight_col = column.count(options.weight_column) > 0;
    if (!has_weight_col && options.weight_mode == WeightMode::column) {
        throw SurveyError("survey file lacks weight column '" + options.weight_column + "'");
    }
    const std::size_t weight_col = has_weight_col ? column[options.weight_column] : 0;
    std::vector<std::size_t> attr_cols;
    for (const auto &attr : schema.attributes()) attr_cols.push_back(require_column(attr.id));
    std::vector<std::size_t> question_cols;
    for (const auto &q : questions) question_cols.push_back(require_column(q.id));

    std::vector<Respondent> respondents;
    std::size_t dropped = 0;
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        std::vector<std::string> cells;
        try {
            cells = split_record(line, options.delimiter);
        } catch (const SurveyError &e) {
            row_error(row, std::string("malformed row (") + e.what() + ")");
        }
        if (cells.size() != header.size()) {
            row_error(row, "malformed row: expected " + std::to_string(header.size()) + " cells, got " +
                               std::to_string(cells.size()));
        }
        Respondent r;
        r.id = trim(cells[id_col]);
        if (r.id.empty()) row_error(row, "empty respondent id");
        if (has_weight_col) {
            const auto cell = trim(cells[weight_col]);
            std::size_t used = 0;
            double w = 0.0;
            try {
                w = std::stod(cell, &used);
            } catch (const std::exception &) {
                used = 0;
            }
            if (used == 0 || used != cell.size() || !std::isfinite(w)) {
                row_error(row, "malformed weight cell '" + cell + "'");
            }
            if (w < 0.0) row_error(row, "negative weight");
            r.weight = w;
        }
        bool excluded = false;
        for (std::size_t a = 0; a < attr_cols.size(); ++a) {
            const auto cell = trim(cells[attr_cols[a]]);
            const auto &attr = schema.at(a);
            auto idx = attr.level_index(cell);
            if (!idx) row_error(row, "undeclared level id '" + cell + "' for attribute '" + attr.id + "'");
            if (schema.is_excluded(attr.id, cell)) excluded = true;
            r.levels.push_back(*idx);
        }
        for (std::size_t q = 0; q < question_cols.size(); ++q) {
            const auto cell = trim(cells[question_cols[q]]);
            if (cell.empty()) {
                r.answers.emplace_back(std::nullopt);
                continue;
            }
            std::size_t used = 0;
            int v = 0;
            try {
                v = std::stoi(cell, &used);
            } catch (const std::exception &) {
                used = 0;
            }
            if (used == 0 || used != cell.size() || v < 1 ||
                static_cast<std::size_t>(v) > questions[q].option_count()) {
                row_error(row, "invalid answer '" + cell + "' for question '" + questions[q].id + "'");
            }
            r.answers.emplace_back(v);
        }
        if (excluded) {
            ++dropped;
            continue;
        }
        respondents.push_back(std::move(r));
    }

    SurveyDataset dataset(std::move(schema), std::move(questions), std::move(respondents), options.weight_mode);
    if (dropped > 0) {
        dataset.warnings.push_back("dropped " + std::to_string(dropped) + " respondent(s) with excluded levels");
    }
    return dataset;
}

SurveyDataset load_survey(const std::filesystem::path &survey_csv, const std::filesystem::path &schema_doc,
                          const std::filesystem::path &questions_doc, const LoadOptions &options) {
    auto schema = load_schema(schema_doc);
    auto questions = load_questions(questions_doc);
    return parse_survey(read_file(survey_csv), std::move(schema), std::move(questions), options);
}

} // namespace silicon
